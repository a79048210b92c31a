#include "tsact/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/special_functions/gamma.hpp>

#include "tsact/error.hpp"

namespace tsact {

std::vector<double> AccuracyMatrix::column(std::size_t m) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& row : values) out.push_back(row.at(m));
  return out;
}

void AccuracyMatrix::validate() const {
  if (k() < 2) throw ContractError("accuracy matrix needs at least two methods");
  if (n() < 2) throw ContractError("accuracy matrix needs at least two datasets");
  if (values.size() != n()) throw ContractError("accuracy matrix row count does not match datasets");
  for (std::size_t d = 0; d < values.size(); ++d) {
    if (values[d].size() != k()) {
      throw ContractError("accuracy matrix row '" + datasets[d] + "' has " +
                          std::to_string(values[d].size()) + " values, expected " +
                          std::to_string(k()));
    }
    for (double v : values[d]) {
      if (!std::isfinite(v)) throw ContractError("accuracy matrix row '" + datasets[d] + "' has a gap");
    }
  }
}

namespace {

std::string method_name(const TrainConfig& c) {
  std::string name(c.activation.name());
  if (c.architecture == Architecture::FCN && !c.norm_enabled) name += "+nobn";
  return name;
}

// Config fields that must agree within one cell (everything but the seed).
std::string cell_signature(const TrainConfig& c) {
  TrainConfig s = c;
  s.seed = 0;
  return to_json(s).dump();
}

}  // namespace

AccuracyMatrix matrix_from_results(std::span<const RunResult> results, Architecture arch,
                                   std::vector<std::string>* missing) {
  struct Cell {
    std::string signature;
    std::map<std::uint64_t, double> by_seed;  // latest record per seed wins
  };
  std::set<std::string> dataset_names, method_names;
  std::map<std::pair<std::string, std::string>, Cell> cells;
  for (const auto& r : results) {
    if (r.config.architecture != arch) continue;
    const std::string method = method_name(r.config);
    dataset_names.insert(r.dataset);
    method_names.insert(method);
    if (r.status != RunStatus::Completed) continue;
    Cell& cell = cells[{r.dataset, method}];
    const std::string sig = cell_signature(r.config);
    if (!cell.signature.empty() && cell.signature != sig) {
      throw ContractError("results for " + r.dataset + "/" + method +
                          " mix different configurations; compare them separately");
    }
    cell.signature = sig;
    cell.by_seed[r.config.seed] = r.test_accuracy;
  }

  AccuracyMatrix m;
  m.methods.assign(method_names.begin(), method_names.end());
  m.datasets.assign(dataset_names.begin(), dataset_names.end());
  std::vector<std::string> gaps;
  for (const auto& d : m.datasets) {
    std::vector<double> row;
    for (const auto& meth : m.methods) {
      const auto it = cells.find({d, meth});
      if (it == cells.end() || it->second.by_seed.empty()) {
        gaps.push_back(d + "/" + meth);
        row.push_back(std::nan(""));
        continue;
      }
      double sum = 0.0;
      for (const auto& [seed, acc] : it->second.by_seed) sum += acc;
      row.push_back(sum / static_cast<double>(it->second.by_seed.size()));
    }
    m.values.push_back(std::move(row));
  }
  if (missing) *missing = std::move(gaps);
  return m;
}

std::vector<double> rank_row(std::span<const double> row) {
  const std::size_t k = row.size();
  std::vector<std::size_t> idx(k);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  std::vector<double> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && row[idx[j + 1]] == row[idx[i]]) ++j;
    // positions i..j (0-based) share rank mean(i+1 .. j+1)
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::vector<std::vector<double>> rank_matrix(const AccuracyMatrix& m) {
  m.validate();
  std::vector<std::vector<double>> out;
  for (const auto& row : m.values) out.push_back(rank_row(row));
  return out;
}

std::vector<double> average_ranks(const AccuracyMatrix& m) {
  const auto ranks = rank_matrix(m);
  std::vector<double> avg(m.k(), 0.0);
  for (const auto& row : ranks)
    for (std::size_t j = 0; j < m.k(); ++j) avg[j] += row[j];
  for (double& v : avg) v /= static_cast<double>(m.n());
  return avg;
}

FriedmanResult friedman(const AccuracyMatrix& m) {
  m.validate();
  const double k = static_cast<double>(m.k()), n = static_cast<double>(m.n());
  if (m.k() < 3) throw ConfigError("Friedman test needs k >= 3 methods; use Wilcoxon for two");
  const auto avg = average_ranks(m);
  double ss = 0.0;
  for (double r : avg) ss += (r - (k + 1.0) / 2.0) * (r - (k + 1.0) / 2.0);
  FriedmanResult f;
  f.statistic = 12.0 * n / (k * (k + 1.0)) * ss;
  f.df = m.k() - 1;
  f.p_value = boost::math::gamma_q(static_cast<double>(f.df) / 2.0, f.statistic / 2.0);
  return f;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("wilcoxon: samples differ in length");
  if (a.empty()) throw ConfigError("wilcoxon: empty samples");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult w;
  w.n_used = diffs.size();
  if (diffs.empty()) {
    w.degenerate = true;
    w.exact = true;
    return w;
  }
  const std::size_t n = diffs.size();
  std::vector<double> mags;
  for (double d : diffs) mags.push_back(std::abs(d));
  // rank_row ranks descending; flip so the smallest magnitude gets rank 1.
  std::vector<double> neg(mags.size());
  std::transform(mags.begin(), mags.end(), neg.begin(), [](double v) { return -v; });
  const auto ranks = rank_row(neg);

  // Doubled ranks are integers even with ties.
  std::vector<std::size_t> r2(n);
  std::size_t wplus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = static_cast<std::size_t>(std::lround(2.0 * ranks[i]));
    total2 += r2[i];
    if (diffs[i] > 0) wplus2 += r2[i];
  }
  w.w_plus = static_cast<double>(wplus2) / 2.0;
  w.w_minus = static_cast<double>(total2 - wplus2) / 2.0;
  w.statistic = std::min(w.w_plus, w.w_minus);
  const std::size_t lo2 = std::min(wplus2, total2 - wplus2);

  if (n <= kWilcoxonExactMax) {
    w.exact = true;
    // count[s]: sign assignments whose doubled W+ equals s.
    std::vector<std::uint64_t> count(total2 + 1, 0);
    count[0] = 1;
    std::size_t reach = 0;
    for (std::size_t r : r2) {
      for (std::size_t s = reach + 1; s-- > 0;) {
        if (count[s]) count[s + r] += count[s];
      }
      reach += r;
    }
    std::uint64_t tail = 0;
    for (std::size_t s = 0; s <= total2; ++s) {
      if (s <= lo2 || s >= total2 - lo2) tail += count[s];
    }
    w.p_value = std::min(1.0, static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n)));
    return w;
  }

  const double nn = static_cast<double>(n);
  double tie_term = 0.0;
  std::vector<double> sorted = mags;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) {
    w.p_value = 1.0;
    return w;
  }
  const double z = std::max(0.0, std::abs(w.w_plus - mean) - 0.5) / std::sqrt(var);
  w.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return w;
}

HolmResult holm_correct(std::span<const double> p_values, double alpha) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("holm: p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  HolmResult h;
  h.adjusted.assign(m, 1.0);
  h.reject.assign(m, false);
  double running = 0.0;
  bool rejecting = true;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = idx[j];
    running = std::max(running, std::min(1.0, static_cast<double>(m - j) * p_values[i]));
    h.adjusted[i] = running;
    rejecting = rejecting && running < alpha;
    h.reject[i] = rejecting;
  }
  return h;
}

WinTieLoss win_tie_loss(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("win_tie_loss: samples differ in length");
  WinTieLoss w;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++w.win;
    else if (a[i] < b[i]) ++w.loss;
    else ++w.tie;
  }
  return w;
}

std::vector<std::vector<std::size_t>> cd_cliques(std::span<const std::size_t> rank_order,
                                                 const std::vector<std::vector<bool>>& significant) {
  const std::size_t k = rank_order.size();
  std::vector<std::vector<std::size_t>> cliques;
  std::size_t covered_to = 0;  // one past the furthest end so far
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i;
    while (j + 1 < k) {
      bool ok = true;
      for (std::size_t t = i; t <= j && ok; ++t) {
        if (significant[rank_order[t]][rank_order[j + 1]]) ok = false;
      }
      if (!ok) break;
      ++j;
    }
    if (j + 1 > covered_to) {
      cliques.emplace_back(rank_order.begin() + static_cast<std::ptrdiff_t>(i),
                           rank_order.begin() + static_cast<std::ptrdiff_t>(j + 1));
      covered_to = j + 1;
    }
  }
  return cliques;
}

const PairwiseTest& ComparisonReport::pair(std::size_t a, std::size_t b) const {
  if (a > b) std::swap(a, b);
  for (const auto& p : pairs) {
    if (p.a == a && p.b == b) return p;
  }
  throw ContractError("no pairwise test for the requested methods");
}

ComparisonReport build_report(const AccuracyMatrix& m, double alpha) {
  m.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  ComparisonReport r;
  r.methods = m.methods;
  r.datasets = m.datasets;
  r.alpha = alpha;
  r.average_ranks = average_ranks(m);
  if (m.k() >= 3) r.friedman = friedman(m);

  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < m.k(); ++j) {
    cols.push_back(m.column(j));
    r.mean_accuracy.push_back(std::accumulate(cols.back().begin(), cols.back().end(), 0.0) /
                              static_cast<double>(m.n()));
  }
  std::vector<double> raw;
  for (std::size_t a = 0; a < m.k(); ++a) {
    for (std::size_t b = a + 1; b < m.k(); ++b) {
      PairwiseTest t;
      t.a = a;
      t.b = b;
      double diff = 0.0;
      for (std::size_t d = 0; d < m.n(); ++d) diff += cols[a][d] - cols[b][d];
      t.mean_difference = diff / static_cast<double>(m.n());
      t.wilcoxon = wilcoxon_signed_rank(cols[a], cols[b]);
      t.wtl = win_tie_loss(cols[a], cols[b]);
      raw.push_back(t.wilcoxon.p_value);
      r.pairs.push_back(t);
    }
  }
  const HolmResult holm = holm_correct(raw, alpha);
  std::vector<std::vector<bool>> sig(m.k(), std::vector<bool>(m.k(), false));
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    r.pairs[i].p_holm = holm.adjusted[i];
    r.pairs[i].significant = holm.reject[i];
    sig[r.pairs[i].a][r.pairs[i].b] = sig[r.pairs[i].b][r.pairs[i].a] = holm.reject[i];
  }

  r.rank_order.resize(m.k());
  std::iota(r.rank_order.begin(), r.rank_order.end(), std::size_t{0});
  std::sort(r.rank_order.begin(), r.rank_order.end(), [&](std::size_t a, std::size_t b) {
    if (r.average_ranks[a] != r.average_ranks[b]) return r.average_ranks[a] < r.average_ranks[b];
    return r.methods[a] < r.methods[b];
  });
  r.cliques = cd_cliques(r.rank_order, sig);
  return r;
}

nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (std::size_t j = 0; j < r.methods.size(); ++j) {
    methods.push_back({{"name", r.methods[j]},
                       {"average_rank", r.average_ranks[j]},
                       {"mean_accuracy", r.mean_accuracy[j]}});
  }
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"a", r.methods[p.a]},
                     {"b", r.methods[p.b]},
                     {"mean_difference", p.mean_difference},
                     {"w_plus", p.wilcoxon.w_plus},
                     {"w_minus", p.wilcoxon.w_minus},
                     {"statistic", p.wilcoxon.statistic},
                     {"n_used", p.wilcoxon.n_used},
                     {"exact", p.wilcoxon.exact},
                     {"degenerate", p.wilcoxon.degenerate},
                     {"p_value", p.wilcoxon.p_value},
                     {"p_holm", p.p_holm},
                     {"significant", p.significant},
                     {"win", p.wtl.win},
                     {"tie", p.wtl.tie},
                     {"loss", p.wtl.loss}});
  }
  nlohmann::json order = nlohmann::json::array();
  for (std::size_t i : r.rank_order) order.push_back(r.methods[i]);
  nlohmann::json cliques = nlohmann::json::array();
  for (const auto& c : r.cliques) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t i : c) names.push_back(r.methods[i]);
    cliques.push_back(names);
  }
  nlohmann::json j = {{"methods", methods},
                      {"datasets", r.datasets},
                      {"alpha", r.alpha},
                      {"rank_order", order},
                      {"pairs", pairs},
                      {"cliques", cliques},
                      {"friedman", nullptr},
                      {"settings",
                       {{"wilcoxon_zero_handling", "drop"},
                        {"wilcoxon_exact_max_n", kWilcoxonExactMax},
                        {"wilcoxon_approximation", "normal, tie-corrected, continuity 0.5"},
                        {"multiple_comparison", "holm"},
                        {"rank_ties", "average"}}}};
  if (r.friedman) {
    j["friedman"] = {{"statistic", r.friedman->statistic},
                     {"p_value", r.friedman->p_value},
                     {"df", r.friedman->df}};
  }
  return j;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string file_token(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const ComparisonReport& r,
                  const AccuracyMatrix& m) {
  std::filesystem::create_directories(dir);
  open_out(dir / "report.json") << to_json(r).dump(2) << '\n';

  auto cd = open_out(dir / "cd.csv");
  cd << "method,avg_rank,clique_id\n";
  for (std::size_t c = 0; c < r.cliques.size(); ++c) {
    for (std::size_t i : r.cliques[c]) {
      cd << csv_field(r.methods[i]) << ',' << num(r.average_ranks[i]) << ',' << c << '\n';
    }
  }

  auto mcm = open_out(dir / "mcm.csv");
  mcm << "method_a,method_b,mean_difference,p_value,p_holm,significant,win,tie,loss\n";
  for (std::size_t a = 0; a < r.methods.size(); ++a) {
    for (std::size_t b = 0; b < r.methods.size(); ++b) {
      if (a == b) continue;
      const PairwiseTest& p = r.pair(a, b);
      const bool forward = p.a == a;
      const WinTieLoss w = forward ? p.wtl : WinTieLoss{p.wtl.loss, p.wtl.tie, p.wtl.win};
      mcm << csv_field(r.methods[a]) << ',' << csv_field(r.methods[b]) << ','
          << num(forward ? p.mean_difference : -p.mean_difference) << ','
          << num(p.wilcoxon.p_value) << ',' << num(p.p_holm) << ','
          << (p.significant ? "true" : "false") << ',' << w.win << ',' << w.tie << ',' << w.loss
          << '\n';
    }
  }

  for (const auto& p : r.pairs) {
    auto sc = open_out(dir / ("scatter_" + file_token(r.methods[p.a]) + "_vs_" +
                              file_token(r.methods[p.b]) + ".csv"));
    sc << "dataset,acc_" << csv_field(r.methods[p.a]) << ",acc_" << csv_field(r.methods[p.b]) << '\n';
    for (std::size_t d = 0; d < m.n(); ++d) {
      sc << csv_field(m.datasets[d]) << ',' << num(m.values[d][p.a]) << ',' << num(m.values[d][p.b])
         << '\n';
    }
  }
}

}  // namespace tsact
