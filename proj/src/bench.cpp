#include "tsact/bench.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "tsact/checkpoint.hpp"
#include "tsact/error.hpp"

namespace tsact {

TrainConfig TrainConfig::defaults(Architecture arch, const ActivationKind& act) {
  TrainConfig c;
  c.architecture = arch;
  c.activation = act;
  if (arch == Architecture::MLP) {
    c.optimizer = OptimizerKind::Adadelta;
    c.lr = 1.0;
    c.epochs = 1000;
    c.norm_enabled = false;
  } else {
    c.optimizer = OptimizerKind::Adam;
    c.lr = 1e-3;
    c.epochs = 2000;
    c.norm_enabled = true;
  }
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"architecture", architecture_name(c.architecture)},
                      {"activation", to_json(c.activation)},
                      {"optimizer", optimizer_name(c.optimizer)},
                      {"lr", c.lr},
                      {"epochs", c.epochs},
                      {"batch_size", c.batch_size},
                      {"seed", c.seed},
                      {"normalization", normalization_name(c.normalization)},
                      {"norm_enabled", c.norm_enabled}};
  if (c.fault_epoch) j["fault_epoch"] = *c.fault_epoch;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  c.activation = activation_from_json(j.at("activation"));
  c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.lr = j.at("lr").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.normalization = parse_normalization(j.at("normalization").get<std::string>());
  c.norm_enabled = j.at("norm_enabled").get<bool>();
  if (j.contains("fault_epoch")) c.fault_epoch = j.at("fault_epoch").get<std::size_t>();
  return c;
}

std::string config_hash(const std::string& dataset, const TrainConfig& config) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  const std::string text = nlohmann::json{{"dataset", dataset}, {"config", to_json(config)}}.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

OptimizerHyper hyper_for(const TrainConfig& c) {
  return c.optimizer == OptimizerKind::Adam ? OptimizerHyper::adam(c.lr)
                                            : OptimizerHyper::adadelta(c.lr);
}

Array gather_rows(const Array& series, std::span<const std::size_t> rows) {
  const std::size_t L = series.dim(1);
  Array out({rows.size(), L});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(series.ptr() + rows[i] * L, L, out.ptr() + i * L);
  }
  return out;
}

}  // namespace

TrainOutcome train(const ModelSpec& spec, const Dataset& data, const TrainConfig& config) {
  validate(spec);
  if (data.size() == 0) throw DataError("empty training split");
  if (data.length() != spec.input_length) {
    throw ContractError("dataset length " + std::to_string(data.length()) +
                        " does not match model input length " + std::to_string(spec.input_length));
  }
  if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  TrainOutcome out;
  out.spec = spec;
  out.state = init_params(spec, config.seed);
  out.optimizer = OptimizerState::make(config.optimizer, hyper_for(config), out.state.params);

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(mix_seed({config.seed, 1, epoch}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    ForwardOptions fopts;
    fopts.poison_activation = config.fault_epoch && epoch >= *config.fault_epoch;
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
        const std::size_t end = std::min(n, start + config.batch_size);
        const std::span<const std::size_t> rows(order.data() + start, end - start);
        std::vector<int> labels;
        for (std::size_t r : rows) labels.push_back(data.labels[r]);

        Rng dropout_rng(mix_seed({config.seed, 2, epoch, batch}));
        Tape tape;
        ForwardPass fp = forward(tape, spec, out.state, gather_rows(data.series, rows), Mode::Train,
                                 dropout_rng, fopts);
        Var loss = classification_loss(tape, spec, fp.logits, labels);
        tape.backward(loss);
        optimizer_step(out.optimizer, out.state.params, gradients(tape, fp.params));
        out.state.norm_stats = std::move(fp.norm_stats);
        loss_sum += tape.value(loss)[0] * static_cast<double>(rows.size());
      }
    } catch (const NumericError& e) {
      out.history.diverged = true;
      out.history.diverged_epoch = epoch;
      out.history.message = e.what();
      return out;
    }
    out.history.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  return out;
}

std::size_t count_correct(const ModelState& state, const ModelSpec& spec, const Dataset& data) {
  if (data.length() != spec.input_length) {
    throw ContractError("dataset length does not match model input length");
  }
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    rows.clear();
    for (std::size_t r = start; r < std::min(data.size(), start + kChunk); ++r) rows.push_back(r);
    const auto pred = predict_classes(spec, infer_logits(spec, state, gather_rows(data.series, rows)));
    for (std::size_t i = 0; i < rows.size(); ++i) correct += pred[i] == data.labels[rows[i]] ? 1 : 0;
  }
  return correct;
}

double evaluate(const ModelState& state, const ModelSpec& spec, const Dataset& data) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty split");
  return static_cast<double>(count_correct(state, spec, data)) / static_cast<double>(data.size());
}

std::string run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

RunStatus parse_run_status(const std::string& s) {
  if (s == "completed") return RunStatus::Completed;
  if (s == "diverged") return RunStatus::Diverged;
  if (s == "failed") return RunStatus::Failed;
  throw DataError("unknown run status '" + s + "'");
}

nlohmann::json payload_json(const RunResult& r) {
  nlohmann::json j = {{"dataset", r.dataset},
                      {"config", to_json(r.config)},
                      {"config_hash", r.config_hash},
                      {"status", run_status_name(r.status)},
                      {"test_accuracy", r.test_accuracy},
                      {"train_accuracy", r.train_accuracy},
                      {"n_test", r.n_test},
                      {"n_test_correct", r.n_test_correct},
                      {"final_loss", nullptr},
                      {"epochs_run", r.epochs_run},
                      {"diverged_epoch", nullptr},
                      {"parameter_count", r.parameter_count},
                      {"checkpoint", r.checkpoint},
                      {"message", r.message}};
  if (r.final_loss) j["final_loss"] = *r.final_loss;
  if (r.diverged_epoch) j["diverged_epoch"] = *r.diverged_epoch;
  return j;
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j = payload_json(r);
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

RunResult run_result_from_json(const nlohmann::json& j) {
  RunResult r;
  r.dataset = j.at("dataset").get<std::string>();
  r.config = train_config_from_json(j.at("config"));
  r.config_hash = j.at("config_hash").get<std::string>();
  r.status = parse_run_status(j.at("status").get<std::string>());
  r.test_accuracy = j.at("test_accuracy").get<double>();
  r.train_accuracy = j.at("train_accuracy").get<double>();
  r.n_test = j.at("n_test").get<std::size_t>();
  r.n_test_correct = j.at("n_test_correct").get<std::size_t>();
  if (!j.at("final_loss").is_null()) r.final_loss = j.at("final_loss").get<double>();
  r.epochs_run = j.at("epochs_run").get<std::size_t>();
  if (!j.at("diverged_epoch").is_null()) r.diverged_epoch = j.at("diverged_epoch").get<std::size_t>();
  r.parameter_count = j.at("parameter_count").get<std::size_t>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.message = j.at("message").get<std::string>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

RunResult run_cell(const DatasetPair& data, const TrainConfig& config,
                   const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.dataset = data.train.name;
  r.config = config;
  r.config_hash = config_hash(r.dataset, config);
  r.n_test = data.test.size();
  try {
    const Dataset train_set = znormalize(data.train, config.normalization);
    const Dataset test_set = znormalize(data.test, config.normalization);
    ModelSpec spec = build_model(config.architecture, train_set.length(), train_set.n_classes(),
                                 config.activation, config.norm_enabled);
    spec.seed = config.seed;
    r.parameter_count = parameter_count(spec);

    TrainOutcome outcome = train(spec, train_set, config);
    r.epochs_run = outcome.history.epoch_loss.size();
    if (outcome.history.diverged) {
      r.status = RunStatus::Diverged;
      r.diverged_epoch = outcome.history.diverged_epoch;
      r.message = outcome.history.message;
    } else {
      r.status = RunStatus::Completed;
      if (!outcome.history.epoch_loss.empty()) r.final_loss = outcome.history.epoch_loss.back();
      r.n_test_correct = count_correct(outcome.state, spec, test_set);
      r.test_accuracy = r.n_test == 0 ? 0.0 : static_cast<double>(r.n_test_correct) / static_cast<double>(r.n_test);
      r.train_accuracy = evaluate(outcome.state, spec, train_set);

      const std::filesystem::path rel = std::filesystem::path("checkpoints") / (r.config_hash + ".ckpt");
      save_checkpoint(out_dir / rel, {spec, outcome.state, outcome.optimizer, config.seed});
      std::ofstream hist(out_dir / "checkpoints" / (r.config_hash + ".loss.csv"), std::ios::trunc);
      hist << "epoch,loss\n";
      char buf[32];
      for (std::size_t e = 0; e < outcome.history.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", outcome.history.epoch_loss[e]);
        hist << e << ',' << buf << '\n';
      }
      r.checkpoint = rel.generic_string();
    }
  } catch (const Error& e) {
    r.status = RunStatus::Failed;
    r.message = e.what();
  } catch (const std::exception& e) {
    r.status = RunStatus::Failed;
    r.message = std::string("unexpected: ") + e.what();
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ResultsStore::ResultsStore(std::filesystem::path path) : path_(std::move(path)) {}

std::vector<RunResult> ResultsStore::load() const {
  std::lock_guard lock(mutex_);
  std::vector<RunResult> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      out.push_back(run_result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path_.string() + ": line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::optional<RunResult> ResultsStore::find_final(const std::string& hash) const {
  std::optional<RunResult> found;
  for (auto& r : load()) {
    if (r.config_hash == hash && r.status != RunStatus::Failed) found = std::move(r);
  }
  return found;
}

void ResultsStore::append(const RunResult& r) {
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw DataError("cannot append to " + path_.string());
  out << to_json(r).dump() << '\n';
  out.flush();
}

DatasetSource ucr_source(const std::filesystem::path& root) {
  return [root](const std::string& name) { return load_ucr_dataset(root, name); };
}

std::vector<SweepCell> plan_sweep(std::span<const std::string> datasets,
                                  std::span<const ActivationKind> activations,
                                  std::span<const std::uint64_t> seeds, const TrainConfig& base) {
  if (datasets.empty()) throw ConfigError("sweep needs at least one dataset");
  if (activations.empty()) throw ConfigError("sweep needs at least one activation");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  std::vector<SweepCell> cells;
  for (const auto& d : datasets) {
    for (const auto& a : activations) {
      for (std::uint64_t s : seeds) {
        TrainConfig c = base;
        c.activation = a;
        c.seed = s;
        cells.push_back({d, c, config_hash(d, c)});
      }
    }
  }
  return cells;
}

SweepSummary run_sweep(std::span<const SweepCell> cells, const DatasetSource& source,
                       const SweepOptions& options) {
  if (cells.empty()) throw ConfigError("empty sweep");
  std::filesystem::create_directories(options.out_dir);

  std::map<std::string, DatasetPair> data;
  for (const auto& c : cells) {
    if (!data.contains(c.dataset)) data.emplace(c.dataset, source(c.dataset));
  }

  nlohmann::json manifest_cells = nlohmann::json::array();
  for (const auto& c : cells) {
    manifest_cells.push_back({{"dataset", c.dataset}, {"hash", c.hash}, {"config", to_json(c.config)}});
  }
  {
    std::ofstream m(options.out_dir / "sweep_manifest.json", std::ios::trunc);
    m << nlohmann::json{{"results", "results.jsonl"}, {"cells", manifest_cells}}.dump(2) << '\n';
  }

  ResultsStore store(options.out_dir / "results.jsonl");
  std::map<std::string, RunResult> final_by_hash;
  for (auto& r : store.load()) {
    if (r.status != RunStatus::Failed) final_by_hash[r.config_hash] = std::move(r);
  }

  SweepSummary summary;
  summary.results.resize(cells.size());
  std::vector<std::size_t> pending;
  std::mutex report_mutex;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto it = final_by_hash.find(cells[i].hash);
    if (it != final_by_hash.end()) {
      summary.results[i] = it->second;
      ++summary.cached;
      if (options.on_result) options.on_result(it->second, true);
    } else {
      pending.push_back(i);
    }
  }

  // Two cells with the same hash would train twice; run each hash once.
  std::map<std::string, std::size_t> first_of_hash;
  std::vector<std::size_t> unique_pending;
  for (std::size_t i : pending) {
    if (first_of_hash.emplace(cells[i].hash, i).second) unique_pending.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < unique_pending.size(); k = next++) {
      const std::size_t i = unique_pending[k];
      RunResult r = run_cell(data.at(cells[i].dataset), cells[i].config, options.out_dir);
      store.append(r);
      std::lock_guard lock(report_mutex);
      summary.results[i] = r;
      if (options.on_result) options.on_result(r, false);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, unique_pending.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i : pending) summary.results[i] = summary.results[first_of_hash.at(cells[i].hash)];

  summary.trained = unique_pending.size();
  for (const auto& r : summary.results) {
    switch (r.status) {
      case RunStatus::Completed: ++summary.completed; break;
      case RunStatus::Diverged: ++summary.diverged; break;
      case RunStatus::Failed: ++summary.failed; break;
    }
  }
  return summary;
}

void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace tsact
