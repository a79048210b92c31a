// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 100).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "tsact/bench.hpp"
#include "tsact/properties.hpp"
#include "tsact/stats.hpp"

namespace fs = std::filesystem;
using namespace tsact;

namespace {

constexpr double kPi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict ac1() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double overall = 0.0;
  for (Activation a : kAllActivations) {
    const ActivationKind k = a;
    const auto ks = kinks(k);
    double worst = 0.0;
    int used = 0;
    while (used < 1000) {
      const double x = u(gen);
      bool near = false;
      for (double kp : ks) near = near || std::abs(x - kp) <= 1e-3;
      if (near) continue;
      ++used;
      const double fd = oracle::central_diff([&](double t) { return eval(k, t); }, x, 1e-5);
      const double d = derivative(k, x);
      worst = std::max(worst, std::abs(d - fd) / std::max(1.0, std::abs(d)));
    }
    v.require(worst < 1e-6, std::string(activation_name(a)) + " rel err " + fmt(worst));
    overall = std::max(overall, worst);
  }
  const double secs = seconds_since(t0);
  v.require(secs < 2.0, "runtime " + fmt(secs) + " s");
  if (v.pass) v.detail = "max rel err " + fmt(overall) + " over 10x1000 points, " + fmt(secs) + " s";
  return v;
}

Verdict ac2() {
  Verdict v;
  const auto l = subdifferential(Activation::LeakySineLU, 0.0);
  v.require(l.lower == 0.5 && l.upper == 1.0, "LeakySineLU hull");
  v.require(l.one_sided == std::vector<double>{1.0, 0.5}, "LeakySineLU one-sided {1, 0.5}");
  const auto r = subdifferential(Activation::ReLU, 0.0);
  v.require(r.lower == 0.0 && r.upper == 1.0, "ReLU hull");
  if (v.pass) v.detail = "LeakySineLU [0.5, 1] from {1, 0.5}; ReLU [0, 1]";
  return v;
}

Verdict ac3() {
  Verdict v;
  using E = ExtendedReal;
  // Published limits and monotonicity, transcribed independently of catalog().
  struct Row {
    Activation a;
    E lower, upper;
    bool monotone;
  };
  const std::vector<Row> table = {
      {Activation::Sigmoid, E::finite(0), E::finite(1), true},
      {Activation::TanH, E::finite(-1), E::finite(1), true},
      {Activation::Sine, E::finite(0), E::finite(1), false},
      {Activation::ReLU, E::finite(0), E::pos_inf(), true},
      {Activation::ELU, E::finite(-1), E::pos_inf(), true},
      {Activation::PReLU, E::neg_inf(), E::pos_inf(), true},
      {Activation::GeLU, E::finite(0), E::pos_inf(), false},
      {Activation::SiLU, E::finite(0), E::pos_inf(), false},
      {Activation::Snake, E::neg_inf(), E::pos_inf(), true},
      {Activation::LeakySineLU, E::neg_inf(), E::pos_inf(), true},
  };
  for (const auto& row : table) {
    const std::string name(activation_name(row.a));
    const auto rec = catalog(row.a);
    v.require(rec.tabulated_lower == row.lower && rec.tabulated_upper == row.upper, name + " catalog");
    const auto probe = check_limits(row.a);
    if (row.a == Activation::Sine) {
      v.require(rec.limit_deviation, "sine deviation not flagged");
      v.require(probe.negative.behavior == TailBehavior::Oscillating &&
                    probe.positive.behavior == TailBehavior::Oscillating &&
                    probe.negative.estimate == E::no_limit() && probe.positive.estimate == E::no_limit(),
                "sine probe not oscillating");
    } else {
      v.require(probe.negative.estimate == row.lower, name + " lower " + probe.negative.estimate.str());
      v.require(probe.positive.estimate == row.upper, name + " upper " + probe.positive.estimate.str());
    }
    v.require(check_monotone(row.a).monotone == row.monotone, name + " monotone verdict");
  }
  if (v.pass) v.detail = "limits 9/9 + sine deviation (oscillating, no limit); monotone 10/10";
  return v;
}

Verdict ac4() {
  Verdict v;
  const double pos = check_semi_periodicity(Activation::LeakySineLU, kPi, 0.0, 20.0, 1000, true, false).max_deviation;
  const double neg = check_semi_periodicity(Activation::LeakySineLU, kPi, -20.0, -kPi, 1000, false, true).max_deviation;
  const double snake = check_semi_periodicity(ActivationKind::snake(1.0), kPi, -20.0, 20.0, 1000).max_deviation;
  v.require(pos < 1e-12, "(0,20] dev " + fmt(pos));
  v.require(neg < 1e-12, "[-20,-pi) dev " + fmt(neg));
  v.require(snake < 1e-12, "snake dev " + fmt(snake));
  if (v.pass) v.detail = "max dev " + fmt(std::max({pos, neg, snake}));
  return v;
}

Verdict ac5() {
  Verdict v;
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> layers_d(2, 5), width_d(1, 16);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int net = 0; net < 20; ++net) {
    const int layers = layers_d(gen);
    std::vector<std::size_t> widths{static_cast<std::size_t>(width_d(gen))};
    std::vector<StackLayer> stack;
    std::vector<std::vector<std::vector<double>>> ws;
    std::vector<std::vector<double>> bs;
    for (int l = 0; l < layers; ++l) {
      const std::size_t in = widths.back(), out = static_cast<std::size_t>(width_d(gen));
      widths.push_back(out);
      DenseLayer d{Array({in, out}), Array({out})};
      std::vector<std::vector<double>> w(in, std::vector<double>(out));
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t j = 0; j < out; ++j) w[i][j] = d.weight.at(i, j) = u(gen);
      for (std::size_t j = 0; j < out; ++j) d.bias[j] = u(gen);
      ws.push_back(w);
      bs.push_back(d.bias.values());
      stack.emplace_back(std::move(d));
    }
    const DenseLayer total = affine_collapse(stack);
    std::vector<std::vector<double>> tw(widths.front(), std::vector<double>(widths.back()));
    for (std::size_t i = 0; i < widths.front(); ++i)
      for (std::size_t j = 0; j < widths.back(); ++j) tw[i][j] = total.weight.at(i, j);
    for (int s = 0; s < 100; ++s) {
      std::vector<double> x(widths.front());
      for (double& e : x) e = 3.0 * u(gen);
      const auto full = oracle::dense_forward(ws, bs, x);
      const auto collapsed = oracle::dense_forward({tw}, {total.bias.values()}, x);
      for (std::size_t j = 0; j < full.size(); ++j) worst = std::max(worst, std::abs(full[j] - collapsed[j]));
    }
  }
  v.require(worst < 1e-9, "max abs err " + fmt(worst));
  if (v.pass) v.detail = "20 nets x 100 inputs, max abs err " + fmt(worst);
  return v;
}

Verdict ac6() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sine = fourier_fit_demo(FourierSeries{0.0, {0.0}, {1.0}, 2 * kPi});
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FourierSeries three{u(gen), {u(gen), u(gen), u(gen)}, {u(gen), u(gen), u(gen)}, 2 * kPi};
  const auto series = fourier_fit_demo(three);
  const double secs = seconds_since(t0);
  v.require(!sine.diverged && sine.mse < 1e-6, "sin(t) mse " + fmt(sine.mse));
  v.require(!series.diverged && series.mse < 1e-4, "3-term mse " + fmt(series.mse));
  v.require(secs < 30.0, "runtime " + fmt(secs) + " s");
  if (v.pass) v.detail = "sin mse " + fmt(sine.mse) + ", 3-term mse " + fmt(series.mse) + ", " + fmt(secs) + " s";
  return v;
}

Verdict ac7() {
  Verdict v;
  Rng rng(7);
  Array x({4, 24});
  for (double& e : x.data()) e = rng.normal();
  const std::vector<int> labels{0, 1, 2, 1};
  double worst = 0.0;
  std::size_t checked = 0;
  struct Variant {
    Architecture arch;
    bool norm;
    const char* name;
  };
  for (const Variant& var : {Variant{Architecture::MLP, false, "mlp"}, Variant{Architecture::FCN, true, "fcn+bn"},
                             Variant{Architecture::FCN, false, "fcn"}}) {
    for (Activation a : kAllActivations) {
      const ModelSpec spec = build_model(var.arch, 24, 3, a, var.norm);
      const auto rep = oracle::model_grad_check(spec, init_params(spec, 11), x, labels, 13);
      checked += rep.checked;
      worst = std::max(worst, rep.max_rel_error);
      v.require(rep.max_rel_error < 1e-4, std::string(var.name) + "/" + std::string(activation_name(a)) + " " +
                                              fmt(rep.max_rel_error) + " at " + rep.worst);
      v.require(rep.checked > 0, std::string(var.name) + "/" + std::string(activation_name(a)) + " nothing checked");
    }
  }
  if (v.pass) v.detail = "30 models, " + std::to_string(checked) + " coordinates, max rel err " + fmt(worst);
  return v;
}

// Majority class of the training split, scored on the test split.
double majority_baseline(const DatasetPair& p) {
  std::map<int, std::size_t> counts;
  for (int y : p.train.labels) ++counts[y];
  int best = counts.begin()->first;
  for (const auto& [c, n] : counts)
    if (n > counts[best]) best = c;
  std::size_t hits = 0;
  for (int y : p.test.labels) hits += y == best;
  return static_cast<double>(hits) / static_cast<double>(p.test.size());
}

Verdict ac8() {
  Verdict v;
  // toy: class 0 sin(2 pi t / L), class 1 flat
  {
    Dataset toy;
    toy.series = Array({40, 32}, 0.0);
    for (std::size_t i = 0; i < 40; ++i) {
      toy.labels.push_back(i < 20 ? 0 : 1);
      if (i < 20)
        for (std::size_t t = 0; t < 32; ++t) toy.series.at(i, t) = std::sin(2 * kPi * static_cast<double>(t) / 32);
    }
    toy.label_map = LabelMap::from_labels({"0", "1"});
    TrainConfig cfg = TrainConfig::defaults(Architecture::MLP, Activation::LeakySineLU);
    cfg.epochs = 200;
    const ModelSpec spec = build_mlp(32, 2, Activation::LeakySineLU);
    const TrainOutcome out = train(spec, toy, cfg);
    const double acc = evaluate(out.state, spec, toy);
    v.require(acc == 1.0, "toy train accuracy " + fmt(acc));
    v.detail = "toy train acc " + fmt(acc);
  }

  const std::vector<std::string> datasets{"ChinatownSubset", "ItalyPowerDemand", "GunPoint", "ArrowHead"};
  const std::vector<ActivationKind> acts{Activation::LeakySineLU, Activation::ReLU};
  const TrainConfig base = TrainConfig::defaults(Architecture::MLP);
  const auto cells = plan_sweep(datasets, acts, std::vector<std::uint64_t>{0}, base);
  const fs::path out = fs::temp_directory_path() / "tsact_acceptance_ac8";
  fs::remove_all(out);
  SweepOptions opts;
  opts.out_dir = out;
  opts.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto source = ucr_source(TSACT_TEST_DATA);
  const SweepSummary s = run_sweep(cells, source, opts);
  v.require(s.completed == cells.size(), "only " + std::to_string(s.completed) + " cells completed");

  std::size_t beating = 0;
  for (const auto& name : datasets) {
    const double baseline = majority_baseline(source(name));
    bool both = true;
    std::string accs;
    for (const auto& r : s.results) {
      if (r.dataset != name) continue;
      both = both && r.status == RunStatus::Completed && r.test_accuracy > baseline;
      accs += " " + std::string(r.config.activation.name()) + "=" + fmt(r.test_accuracy);
    }
    beating += both;
    v.detail += "; " + name + " base " + fmt(baseline) + accs;
  }
  v.require(beating >= 3, "only " + std::to_string(beating) + " datasets where both beat the baseline");

  // comparison pipeline on the subset
  std::vector<std::string> missing;
  const AccuracyMatrix m = matrix_from_results(s.results, Architecture::MLP, &missing);
  v.require(missing.empty(), "matrix has gaps");
  if (missing.empty()) {
    const ComparisonReport report = build_report(m);
    write_report(out / "compare", report, m);
    for (const char* f : {"report.json", "cd.csv", "mcm.csv", "scatter_leakysinelu_vs_relu.csv"})
      v.require(fs::exists(out / "compare" / f), std::string("missing ") + f);
    v.detail += "; avg ranks";
    for (std::size_t j = 0; j < report.methods.size(); ++j)
      v.detail += " " + report.methods[j] + "=" + fmt(report.average_ranks[j]);
  }
  fs::remove_all(out);
  return v;
}

Verdict ac9() {
  Verdict v;
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<std::size_t> nd(1, 12);
  std::uniform_int_distribution<int> val(0, 8);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = nd(gen);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = val(gen) / 8.0;
      b[i] = val(gen) / 8.0;
    }
    mismatches += wilcoxon_signed_rank(a, b).p_value != oracle::wilcoxon_enumeration(a, b);
  }
  v.require(mismatches == 0, std::to_string(mismatches) + "/200 Wilcoxon mismatches");

  AccuracyMatrix hand;
  hand.methods = {"a", "b", "c"};
  hand.datasets = {"d1", "d2"};
  hand.values = {{0.9, 0.8, 0.7}, {0.6, 0.5, 0.4}};
  const double chi = friedman(hand).statistic;
  v.require(chi == 4.0, "Friedman hand case " + fmt(chi));

  const auto holm = holm_correct(std::vector<double>{0.01, 0.04});
  v.require(std::abs(holm.adjusted[0] - 0.02) < 1e-15 && std::abs(holm.adjusted[1] - 0.04) < 1e-15,
            "Holm adjusted");
  v.require(holm.reject == std::vector<bool>{true, true}, "Holm rejections");

  std::uniform_int_distribution<std::size_t> kd(2, 12), rows(2, 10);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = kd(gen), n = rows(gen);
    AccuracyMatrix m;
    for (std::size_t j = 0; j < k; ++j) m.methods.push_back("m" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
      m.datasets.push_back("d" + std::to_string(i));
      std::vector<double> row(k);
      for (double& e : row) e = val(gen) / 8.0;
      m.values.push_back(row);
    }
    for (const auto& r : rank_matrix(m)) {
      double sum = 0;
      for (double e : r) sum += e;
      bad += sum != k * (k + 1) / 2.0;
    }
  }
  v.require(bad == 0, std::to_string(bad) + " rank rows with wrong sum");
  if (v.pass) v.detail = "200/200 exact Wilcoxon, Friedman 4, Holm (0.02, 0.04), 1000 rank matrices";
  return v;
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::multiset<std::string> payload_lines(const fs::path& results) {
  std::multiset<std::string> out;
  std::ifstream in(results);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    j.erase("wall_seconds");
    out.insert(j.dump());
  }
  return out;
}

Verdict ac10() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "tsact_acceptance_ac10";
  fs::remove_all(root);
  struct Sweep {
    std::string arch, extra;
  };
  std::size_t records = 0;
  for (const Sweep& sw : {Sweep{"mlp", "--epochs 20 --seeds 0,1"}, Sweep{"fcn", "--epochs 3"}}) {
    const std::string base = std::string(TSACT_CLI) + " bench --arch " + sw.arch +
                             " --activations leakysinelu,relu,prelu,snake --datasets ChinatownSubset,ItalyPowerDemand " +
                             sw.extra + " --data-root " + TSACT_TEST_DATA;
    std::vector<fs::path> files;
    for (const std::string jobs : {"1", "4", "4"}) {
      const fs::path out = root / (sw.arch + "_" + std::to_string(files.size()));
      const int code = shell(base + " --jobs " + jobs + " --out " + out.string() + " > /dev/null");
      v.require(code == 0, sw.arch + " bench exit " + std::to_string(code));
      fs::path dir;
      for (const auto& e : fs::directory_iterator(out)) dir = e.path();
      files.push_back(dir / "results.jsonl");
      if (files.size() > 1) {
        std::ifstream m0(files[0].parent_path() / "manifest.json"), m1(dir / "manifest.json");
        std::stringstream s0, s1;
        s0 << m0.rdbuf();
        s1 << m1.rdbuf();
        v.require(s0.str() == s1.str(), sw.arch + " manifests differ");
      }
    }
    const auto first = payload_lines(files[0]);
    records += first.size();
    v.require(!first.empty(), sw.arch + " no records");
    for (std::size_t i = 1; i < files.size(); ++i)
      v.require(payload_lines(files[i]) == first, sw.arch + " run " + std::to_string(i) + " payload differs");
  }
  fs::remove_all(root);
  if (v.pass) v.detail = std::to_string(records) + " records identical across jobs=1, 4, 4 (MLP and FCN+BN)";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},  {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += !v.pass;
    std::printf("%s %s (%.1f s): %s\n", name.c_str(), v.pass ? "PASS" : "FAIL", seconds_since(t0), v.detail.c_str());
    std::fflush(stdout);
  }
  return std::min(failed, 100);
}
