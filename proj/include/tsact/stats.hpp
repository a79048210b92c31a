#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsact/bench.hpp"

namespace tsact {

// values[d][m]: accuracy of method m on dataset d. Complete, k >= 2, N >= 2.
struct AccuracyMatrix {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> values;

  std::size_t k() const { return methods.size(); }
  std::size_t n() const { return datasets.size(); }
  std::vector<double> column(std::size_t m) const;
  // ContractError unless the shape is consistent, k >= 2, N >= 2 and all
  // values are finite.
  void validate() const;
};

// Builds the matrix for one architecture from run records: one method per
// activation name, one row per dataset. Several seeds of a cell are averaged.
// Only completed runs count; `missing` receives "dataset/activation" for
// every empty cell (the caller decides whether that is fatal).
AccuracyMatrix matrix_from_results(std::span<const RunResult> results, Architecture arch,
                                   std::vector<std::string>* missing = nullptr);

// Per-dataset ranks, 1 = highest accuracy, ties share the mean position.
std::vector<double> rank_row(std::span<const double> row);
std::vector<std::vector<double>> rank_matrix(const AccuracyMatrix& m);
std::vector<double> average_ranks(const AccuracyMatrix& m);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t df = 0;
};

// chi2_F = 12N / (k(k+1)) * sum_j (R_j - (k+1)/2)^2 with k - 1 degrees of
// freedom. ConfigError for k < 3.
FriedmanResult friedman(const AccuracyMatrix& m);

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_used = 0;  // after dropping zero differences
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

// Signed-rank test on a - b. Zero differences are dropped. Exact
// distribution (ties included, via doubled ranks) for n <= 20, otherwise a
// normal approximation with tie and continuity correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct HolmResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

// Step-down Holm: adjusted_(i) = max_{j<=i} (m - j + 1) p_(j), capped at 1;
// hypotheses are rejected in ascending order while adjusted < alpha.
HolmResult holm_correct(std::span<const double> p_values, double alpha = 0.05);

struct WinTieLoss {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t loss = 0;
  friend bool operator==(const WinTieLoss&, const WinTieLoss&) = default;
};

WinTieLoss win_tie_loss(std::span<const double> a, std::span<const double> b);

struct PairwiseTest {
  std::size_t a = 0;  // method indices, a < b
  std::size_t b = 0;
  double mean_difference = 0.0;  // mean(acc_a - acc_b)
  WilcoxonResult wilcoxon;
  double p_holm = 1.0;
  bool significant = false;
  WinTieLoss wtl;  // a versus b
};

struct ComparisonReport {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  double alpha = 0.05;
  std::vector<double> average_ranks;
  std::vector<double> mean_accuracy;
  std::optional<FriedmanResult> friedman;  // absent when k < 3
  std::vector<PairwiseTest> pairs;         // all C(k, 2), (0,1), (0,2), ...
  // Method indices sorted by average rank (best first, ties by name).
  std::vector<std::size_t> rank_order;
  // Maximal runs of rank_order with no significant pair inside; each clique
  // lists method indices. Singletons are included.
  std::vector<std::vector<std::size_t>> cliques;

  const PairwiseTest& pair(std::size_t a, std::size_t b) const;
};

ComparisonReport build_report(const AccuracyMatrix& m, double alpha = 0.05);

// Cliques over a rank order given a pairwise "significantly different"
// predicate matrix (indexed by method).
std::vector<std::vector<std::size_t>> cd_cliques(std::span<const std::size_t> rank_order,
                                                 const std::vector<std::vector<bool>>& significant);

nlohmann::json to_json(const ComparisonReport& r);

// report.json, cd.csv, mcm.csv and scatter_<A>_vs_<B>.csv for every pair.
void write_report(const std::filesystem::path& dir, const ComparisonReport& r,
                  const AccuracyMatrix& m);

}  // namespace tsact
