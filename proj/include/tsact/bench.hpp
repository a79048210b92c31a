#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsact/dataset.hpp"
#include "tsact/model.hpp"
#include "tsact/optim.hpp"

namespace tsact {

struct TrainConfig {
  Architecture architecture = Architecture::MLP;
  ActivationKind activation;
  OptimizerKind optimizer = OptimizerKind::Adadelta;
  double lr = 1.0;
  std::size_t epochs = 1000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::PerSeries;
  bool norm_enabled = false;  // FCN batch norm; always false for MLP
  // Test hook: from this epoch on the first activation layer emits +inf.
  std::optional<std::size_t> fault_epoch;

  // MLP: Adadelta lr 1.0, 1000 epochs. FCN: Adam lr 0.001, 2000 epochs,
  // batch norm on.
  static TrainConfig defaults(Architecture arch, const ActivationKind& act = {});

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// 16 hex digits of FNV-1a over the canonical JSON of (dataset, config).
std::string config_hash(const std::string& dataset, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> epoch_loss;  // sample-weighted mean over the epoch's batches
  bool diverged = false;
  std::optional<std::size_t> diverged_epoch;
  std::string message;
};

struct TrainOutcome {
  ModelSpec spec;
  ModelState state;
  OptimizerState optimizer;
  TrainHistory history;
};

// Trains on an already normalized split. Sample order in epoch e is a
// Fisher-Yates shuffle seeded by (seed, e); the last batch may be partial.
// A non-finite value stops training and marks the outcome diverged.
TrainOutcome train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config);

// Fraction of correct predictions, denominator data.size().
double evaluate(const ModelState& state, const ModelSpec& spec, const Dataset& data);
std::size_t count_correct(const ModelState& state, const ModelSpec& spec, const Dataset& data);

enum class RunStatus { Completed, Diverged, Failed };
std::string run_status_name(RunStatus s);
RunStatus parse_run_status(const std::string& s);

struct RunResult {
  std::string dataset;
  TrainConfig config;
  std::string config_hash;
  RunStatus status = RunStatus::Failed;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  std::size_t n_test = 0;
  std::size_t n_test_correct = 0;
  std::optional<double> final_loss;
  std::size_t epochs_run = 0;
  std::optional<std::size_t> diverged_epoch;
  std::size_t parameter_count = 0;
  std::string checkpoint;  // relative to the output directory
  std::string message;
  double wall_seconds = 0.0;
};

// Everything except wall_seconds, which is the only non-deterministic field.
nlohmann::json payload_json(const RunResult& r);
nlohmann::json to_json(const RunResult& r);
RunResult run_result_from_json(const nlohmann::json& j);

// Normalizes both splits, trains, evaluates and writes
// <out_dir>/checkpoints/<hash>.ckpt plus a per-epoch loss CSV next to it.
// Never throws for training failures: they become Failed / Diverged results.
RunResult run_cell(const DatasetPair& data, const TrainConfig& config,
                   const std::filesystem::path& out_dir);

// Append-only JSON-lines store. Safe to append from several threads.
class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  std::vector<RunResult> load() const;
  // Latest completed or diverged record per hash; failed records are retried.
  std::optional<RunResult> find_final(const std::string& hash) const;
  void append(const RunResult& r);

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
};

using DatasetSource = std::function<DatasetPair(const std::string& name)>;
DatasetSource ucr_source(const std::filesystem::path& root);

struct SweepCell {
  std::string dataset;
  TrainConfig config;
  std::string hash;
};

struct SweepOptions {
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
  // Called after each finished cell (under a lock).
  std::function<void(const RunResult&, bool cached)> on_result;
};

struct SweepSummary {
  std::size_t cached = 0;
  std::size_t trained = 0;
  std::size_t completed = 0;
  std::size_t diverged = 0;
  std::size_t failed = 0;
  std::vector<RunResult> results;  // in cell order
};

// One cell per (dataset, activation, seed); `base` supplies every other
// field. Datasets are loaded once up front; a load failure throws.
std::vector<SweepCell> plan_sweep(std::span<const std::string> datasets,
                                  std::span<const ActivationKind> activations,
                                  std::span<const std::uint64_t> seeds, const TrainConfig& base);

// Runs the cells not already final in <out_dir>/results.jsonl with up to
// `jobs` worker threads, writes <out_dir>/sweep_manifest.json and returns
// the full table.
SweepSummary run_sweep(std::span<const SweepCell> cells, const DatasetSource& source,
                       const SweepOptions& options);

// Keeps large training buffers on the heap instead of fresh mmap pages each
// batch (glibc only; no-op elsewhere). Call once from main.
void tune_allocator();

}  // namespace tsact
