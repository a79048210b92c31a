#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsact/bench.hpp"
#include "tsact/error.hpp"
#include "tsact/properties.hpp"
#include "tsact/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsact;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kData = 3, kDiverged = 4, kIncomplete = 5 };

// Values from --config fill only options that were not given on the command
// line.
struct ConfigFile {
  json values = json::object();

  void load(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file " + path);
    try {
      values = json::parse(in);
    } catch (const json::exception& e) {
      throw DataError("config file " + path + ": " + e.what());
    }
    if (!values.is_object()) throw DataError("config file " + path + " must hold a JSON object");
  }

  template <typename T>
  void fill(const CLI::Option* opt, const char* key, T& target) const {
    if (opt->count() > 0 || !values.contains(key)) return;
    try {
      target = values.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
  }
};

std::string resolve_data_root(const CLI::Option* flag, const std::string& flag_value,
                              const ConfigFile& cfg) {
  if (flag->count() > 0) return flag_value;
  if (const char* env = std::getenv("UCR_DATA_ROOT"); env && *env) return env;
  if (cfg.values.contains("data_root")) return cfg.values.at("data_root").get<std::string>();
  return flag_value;
}

std::string hash_json(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// <out>/<command>-<hash of the resolved config>/ with manifest.json inside.
fs::path prepare_run_dir(const std::string& out, const std::string& command, const json& config) {
  const std::string hash = hash_json({{"command", command}, {"config", config}});
  const fs::path dir = fs::path(out) / (command + "-" + hash);
  fs::create_directories(dir);
  std::ofstream m(dir / "manifest.json", std::ios::trunc);
  m << json{{"command", command}, {"config", config}, {"config_hash", hash}, {"version", kVersion}}.dump(2)
    << '\n';
  return dir;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.pop_back();
    std::size_t b = 0;
    while (b < item.size() && std::isspace(static_cast<unsigned char>(item[b]))) ++b;
    if (b < item.size()) out.push_back(item.substr(b));
  }
  return out;
}

std::vector<ActivationKind> parse_activation_list(const std::string& s) {
  std::vector<ActivationKind> out;
  if (s == "all") {
    for (Activation a : kAllActivations) out.emplace_back(a);
    return out;
  }
  for (const auto& name : split_list(s)) out.push_back(ActivationKind::from_name(name));
  if (out.empty()) throw ConfigError("no activations given");
  return out;
}

// A comma list, or a file with one name per line.
std::vector<std::string> parse_dataset_list(const std::string& s) {
  if (fs::is_regular_file(s)) {
    std::ifstream in(s);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
      for (auto& name : split_list(line)) {
        if (name[0] != '#') out.push_back(name);
      }
    }
    return out;
  }
  return split_list(s);
}

ActivationKind activation_with_param(const std::string& name, std::optional<double> param) {
  ActivationKind kind = ActivationKind::from_name(name);
  if (param) {
    if (!kind.param_name()) throw ConfigError("activation '" + name + "' takes no parameter");
    kind = kind.with_param(*param);
  }
  kind.validate();
  return kind;
}

// ---- analyze -------------------------------------------------------------------

struct AnalyzeArgs {
  std::string activation = "all";
  std::string out = "out";
};

int run_analyze(const AnalyzeArgs& a) {
  std::vector<ActivationKind> kinds = parse_activation_list(a.activation);
  const json config = {{"activation", a.activation}};
  const fs::path dir = prepare_run_dir(a.out, "analyze", config);

  std::vector<PropertyReport> reports;
  json all = json::array();
  for (const auto& k : kinds) {
    reports.push_back(analyze_activation(k));
    all.push_back(to_json(reports.back()));
  }
  std::ofstream(dir / "report.json", std::ios::trunc) << all.dump(2) << '\n';
  std::ofstream(dir / "report.csv", std::ios::trunc) << to_csv(reports);

  bool ok = true;
  std::printf("%-12s %-22s %-22s %-10s %-14s %s\n", "activation", "lower", "upper", "monotone",
              "semi-periodic", "catalog");
  for (const auto& r : reports) {
    const std::string per = r.periodicity ? (r.periodicity->max_deviation < 1e-12 ? "yes" : "no") : "-";
    std::string verdict = r.matches_catalog() ? "match" : "MISMATCH";
    for (const auto& c : r.checks) {
      if (c.whitelisted) verdict = "match (documented deviation)";
    }
    std::printf("%-12s %-22s %-22s %-10s %-14s %s\n", std::string(r.kind.name()).c_str(),
                (r.limits.negative.estimate.str() + " " + tail_behavior_name(r.limits.negative.behavior)).c_str(),
                (r.limits.positive.estimate.str() + " " + tail_behavior_name(r.limits.positive.behavior)).c_str(),
                r.monotone.monotone ? "yes" : "no", per.c_str(), verdict.c_str());
    ok = ok && r.matches_catalog();
  }
  std::printf("reports written to %s\n", dir.string().c_str());
  return ok ? kOk : kFailed;
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string arch = "mlp";
  std::string activation = "leakysinelu";
  std::optional<double> param;
  std::string dataset;
  std::string data_root = ".";
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::string optimizer;
  std::uint64_t seed = 0;
  std::size_t batch_size = 16;
  bool no_norm_layers = false;
  bool no_znorm = false;
  std::string out = "out";
  std::string config;
};

struct TrainOptions {
  CLI::Option *arch, *activation, *param, *dataset, *data_root, *epochs, *lr, *optimizer, *seed,
      *batch_size, *no_norm_layers, *no_znorm, *out;
};

void bind_train_options(CLI::App* sub, TrainArgs& a, TrainOptions& o, bool single_dataset) {
  o.arch = sub->add_option("--arch", a.arch, "mlp or fcn")->capture_default_str();
  o.param = sub->add_option("--param", a.param, "activation parameter (ELU/PReLU alpha, Snake a)");
  o.data_root = sub->add_option("--data-root", a.data_root, "UCR archive root (else $UCR_DATA_ROOT)");
  o.epochs = sub->add_option("--epochs", a.epochs, "epochs (default 1000 MLP, 2000 FCN)");
  o.lr = sub->add_option("--lr", a.lr, "learning rate (default 1.0 MLP, 0.001 FCN)");
  o.optimizer = sub->add_option("--optimizer", a.optimizer, "adadelta or adam (default per arch)");
  o.seed = sub->add_option("--seed", a.seed, "training seed")->capture_default_str();
  o.batch_size = sub->add_option("--batch-size", a.batch_size, "mini-batch size")->capture_default_str();
  o.no_norm_layers = sub->add_flag("--no-norm-layers", a.no_norm_layers, "FCN without batch norm");
  o.no_znorm = sub->add_flag("--no-znorm", a.no_znorm, "skip per-series z-normalization");
  o.out = sub->add_option("--out", a.out, "output root")->capture_default_str();
  sub->add_option("--config", a.config, "JSON config file (flags take precedence)");
  if (single_dataset) {
    o.activation = sub->add_option("--activation", a.activation, "activation name")->capture_default_str();
    o.dataset = sub->add_option("--dataset", a.dataset, "dataset name (required)");
  }
}

void apply_config(const ConfigFile& cfg, TrainArgs& a, const TrainOptions& o) {
  cfg.fill(o.arch, "arch", a.arch);
  if (o.activation) cfg.fill(o.activation, "activation", a.activation);
  if (o.dataset) cfg.fill(o.dataset, "dataset", a.dataset);
  if (cfg.values.contains("param") && o.param->count() == 0) a.param = cfg.values.at("param").get<double>();
  if (cfg.values.contains("epochs") && o.epochs->count() == 0) a.epochs = cfg.values.at("epochs").get<std::size_t>();
  if (cfg.values.contains("lr") && o.lr->count() == 0) a.lr = cfg.values.at("lr").get<double>();
  cfg.fill(o.optimizer, "optimizer", a.optimizer);
  cfg.fill(o.seed, "seed", a.seed);
  cfg.fill(o.batch_size, "batch_size", a.batch_size);
  cfg.fill(o.no_norm_layers, "no_norm_layers", a.no_norm_layers);
  cfg.fill(o.no_znorm, "no_znorm", a.no_znorm);
  cfg.fill(o.out, "out", a.out);
  a.data_root = resolve_data_root(o.data_root, a.data_root, cfg);
}

TrainConfig make_train_config(const TrainArgs& a, const ActivationKind& kind) {
  const Architecture arch = parse_architecture(a.arch);
  TrainConfig c = TrainConfig::defaults(arch, kind);
  if (!a.optimizer.empty()) {
    c.optimizer = parse_optimizer(a.optimizer);
    if (!a.lr) c.lr = c.optimizer == OptimizerKind::Adam ? 1e-3 : 1.0;
  }
  if (a.lr) c.lr = *a.lr;
  if (a.epochs) c.epochs = *a.epochs;
  c.seed = a.seed;
  c.batch_size = a.batch_size;
  if (c.batch_size == 0) throw ConfigError("--batch-size must be >= 1");
  if (!(c.lr > 0.0)) throw ConfigError("--lr must be positive");
  c.normalization = a.no_znorm ? Normalization::None : Normalization::PerSeries;
  c.norm_enabled = arch == Architecture::FCN && !a.no_norm_layers;
  return c;
}

void print_result(const RunResult& r, bool cached) {
  std::printf("%-20s %-12s %-4s %-10s test_acc=%.4f train_acc=%.4f%s%s\n", r.dataset.c_str(),
              std::string(r.config.activation.name()).c_str(),
              architecture_name(r.config.architecture).c_str(), run_status_name(r.status).c_str(),
              r.test_accuracy, r.train_accuracy, cached ? " (cached)" : "",
              r.message.empty() ? "" : ("  " + r.message).c_str());
  std::fflush(stdout);
}

int run_train(const TrainArgs& a) {
  if (a.dataset.empty()) throw ConfigError("--dataset is required");
  const ActivationKind kind = activation_with_param(a.activation, a.param);
  const TrainConfig config = make_train_config(a, kind);
  json resolved = {{"dataset", a.dataset}, {"data_root", a.data_root}, {"train", to_json(config)}};
  const fs::path dir = prepare_run_dir(a.out, "train", resolved);

  const DatasetPair data = load_ucr_dataset(a.data_root, a.dataset);
  ResultsStore store(dir / "results.jsonl");
  RunResult r;
  bool cached = false;
  if (auto prior = store.find_final(config_hash(a.dataset, config))) {
    r = *prior;
    cached = true;
  } else {
    r = run_cell(data, config, dir);
    store.append(r);
  }
  print_result(r, cached);
  std::printf("results in %s\n", dir.string().c_str());
  switch (r.status) {
    case RunStatus::Completed: return kOk;
    case RunStatus::Diverged:
      std::fprintf(stderr, "diverged at epoch %zu: %s\n", r.diverged_epoch.value_or(0), r.message.c_str());
      return kDiverged;
    case RunStatus::Failed: std::fprintf(stderr, "failed: %s\n", r.message.c_str()); return kFailed;
  }
  return kFailed;
}

// ---- bench ---------------------------------------------------------------------

struct BenchArgs {
  TrainArgs train;
  std::string activations = "all";
  std::string datasets;
  std::string seeds = "0";
  std::size_t jobs = 1;
};

int run_bench(const BenchArgs& b) {
  const auto kinds = parse_activation_list(b.activations);
  const auto datasets = parse_dataset_list(b.datasets);
  if (datasets.empty()) throw ConfigError("no datasets given");
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(b.seeds)) {
    try {
      seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + s + "'");
    }
  }
  const TrainConfig base = make_train_config(b.train, kinds.front());
  const auto cells = plan_sweep(datasets, kinds, seeds, base);

  json act_names = json::array();
  for (const auto& k : kinds) act_names.push_back(to_json(k));
  json resolved = {{"datasets", datasets}, {"activations", act_names}, {"seeds", seeds},
                   {"data_root", b.train.data_root}, {"train", to_json(base)}};
  resolved["train"].erase("activation");
  resolved["train"].erase("seed");
  const fs::path dir = prepare_run_dir(b.train.out, "bench", resolved);

  SweepOptions opts;
  opts.out_dir = dir;
  opts.jobs = b.jobs;
  opts.on_result = [](const RunResult& r, bool cached) {
    if (!cached) print_result(r, false);
  };
  const SweepSummary s = run_sweep(cells, ucr_source(b.train.data_root), opts);
  std::printf("%zu cached, %zu trained (%zu completed, %zu diverged, %zu failed)\n", s.cached,
              s.trained, s.completed, s.diverged, s.failed);
  std::printf("results in %s\n", (dir / "results.jsonl").string().c_str());
  return kOk;
}

// ---- compare -------------------------------------------------------------------

struct CompareArgs {
  std::string results;
  std::string arch = "mlp";
  double alpha = 0.05;
  std::string out = "out";
};

int run_compare(const CompareArgs& c) {
  if (!fs::is_regular_file(c.results)) throw DataError("results file " + c.results + " not found");
  const auto results = ResultsStore(c.results).load();
  std::vector<std::string> missing;
  const AccuracyMatrix m = matrix_from_results(results, parse_architecture(c.arch), &missing);
  if (!missing.empty()) {
    std::fprintf(stderr, "incomplete results: %zu missing cell(s)\n", missing.size());
    for (const auto& cell : missing) std::fprintf(stderr, "  missing %s\n", cell.c_str());
    return kIncomplete;
  }
  if (m.k() < 2 || m.n() < 2) {
    std::fprintf(stderr, "need at least 2 methods and 2 datasets for %s (have %zu x %zu)\n",
                 c.arch.c_str(), m.k(), m.n());
    return kIncomplete;
  }
  const ComparisonReport r = build_report(m, c.alpha);
  const json resolved = {{"results", fs::absolute(c.results).lexically_normal().string()},
                         {"arch", c.arch}, {"alpha", c.alpha}};
  const fs::path dir = prepare_run_dir(c.out, "compare", resolved);
  write_report(dir, r, m);

  std::printf("%zu methods x %zu datasets", m.k(), m.n());
  if (r.friedman) std::printf(", Friedman chi2=%.4f p=%.4g", r.friedman->statistic, r.friedman->p_value);
  std::printf("\n");
  for (std::size_t i : r.rank_order) {
    std::printf("  %-16s avg rank %.4f  mean acc %.4f\n", r.methods[i].c_str(), r.average_ranks[i],
                r.mean_accuracy[i]);
  }
  std::printf("%zu clique(s); report in %s\n", r.cliques.size(), dir.string().c_str());
  return kOk;
}

// ---- trace ---------------------------------------------------------------------

struct TraceArgs {
  std::string activation = "leakysinelu";
  std::optional<double> param;
  std::string input;
  std::string grid;
  bool ucr = false;
  std::size_t row = 0;
  std::string output;
};

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw DataError(where + ": '" + s + "' is not a finite number");
  }
  return v;
}

std::vector<double> parse_row(const std::string& line, bool skip_label, const std::string& where) {
  std::vector<double> out;
  std::string field;
  std::string normalized = line;
  for (char& c : normalized) {
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  }
  std::istringstream in(normalized);
  bool first = true;
  while (in >> field) {
    if (first && skip_label) {
      first = false;
      continue;
    }
    first = false;
    out.push_back(parse_number(field, where));
  }
  if (out.empty()) throw DataError(where + ": no values");
  return out;
}

std::vector<double> trace_input(const TraceArgs& t) {
  if (!t.grid.empty()) {
    const auto parts = [&] {
      std::vector<std::string> p;
      std::string item;
      std::istringstream in(t.grid);
      while (std::getline(in, item, ':')) p.push_back(item);
      return p;
    }();
    if (parts.size() != 3) throw ConfigError("--grid expects lo:hi:n");
    const double lo = parse_number(parts[0], "--grid"), hi = parse_number(parts[1], "--grid");
    const std::size_t n = static_cast<std::size_t>(parse_number(parts[2], "--grid"));
    if (n < 2 || !(hi > lo)) throw ConfigError("--grid needs hi > lo and n >= 2");
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    return xs;
  }
  if (t.input.empty()) throw ConfigError("trace needs --input or --grid");
  if (!fs::is_regular_file(t.input)) return parse_row(t.input, t.ucr, "--input");
  std::ifstream in(t.input);
  if (!in) throw DataError("cannot open " + t.input);
  std::string line;
  std::size_t index = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (index++ == t.row) return parse_row(line, t.ucr, t.input + ": line " + std::to_string(lineno));
  }
  throw DataError(t.input + " has no row " + std::to_string(t.row));
}

int run_trace(const TraceArgs& t) {
  const ActivationKind kind = activation_with_param(t.activation, t.param);
  const std::vector<double> xs = trace_input(t);
  const DeadRegionTrace dead = dead_region_trace(kind, xs);

  std::ostringstream csv;
  csv << "index,x,sigma,dsigma,dead\n";
  char buf[128];
  double min_slope = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = derivative(kind, xs[i]);
    min_slope = std::min(min_slope, d);
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%d\n", i, xs[i], dead.activated[i], d,
                  dead.dead[i] ? 1 : 0);
    csv << buf;
  }
  if (t.output.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path p(t.output);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw DataError("cannot write " + t.output);
    out << csv.str();
  }
  std::fprintf(stderr, "activation=%s n=%zu dead_fraction=%.6f min_dsigma=%.6g\n",
               std::string(kind.name()).c_str(), xs.size(), dead.dead_fraction, min_slope);
  return kOk;
}

int dispatch(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Activation-function lab and UCR benchmark runner"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "check limits, monotonicity and semi-periodicity");
  an->add_option("--activation", analyze.activation, "activation name or 'all'")->capture_default_str();
  an->add_option("--out", analyze.out, "output root")->capture_default_str();

  TrainArgs train;
  TrainOptions train_opts{};
  auto* tr = app.add_subcommand("train", "train and evaluate one model");
  bind_train_options(tr, train, train_opts, true);

  BenchArgs bench;
  TrainOptions bench_opts{};
  auto* be = app.add_subcommand("bench", "run a dataset x activation sweep");
  bind_train_options(be, bench.train, bench_opts, false);
  auto* be_acts = be->add_option("--activations", bench.activations, "comma list or 'all'")->capture_default_str();
  auto* be_data = be->add_option("--datasets", bench.datasets, "comma list or file of names (required)");
  auto* be_seeds = be->add_option("--seeds", bench.seeds, "comma list of seeds")->capture_default_str();
  auto* be_jobs = be->add_option("--jobs", bench.jobs, "parallel cells")->capture_default_str()->check(CLI::PositiveNumber);

  CompareArgs compare;
  auto* co = app.add_subcommand("compare", "rank/Friedman/Wilcoxon-Holm report from results.jsonl");
  co->add_option("--results", compare.results, "results.jsonl")->required();
  co->add_option("--arch", compare.arch, "mlp or fcn")->capture_default_str();
  co->add_option("--alpha", compare.alpha, "significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  co->add_option("--out", compare.out, "output root")->capture_default_str();

  TraceArgs trace;
  auto* tc = app.add_subcommand("trace", "CSV of x, sigma(x), sigma'(x) and dead-region flags");
  tc->add_option("--activation", trace.activation, "activation name")->capture_default_str();
  tc->add_option("--param", trace.param, "activation parameter");
  tc->add_option("--input", trace.input, "file (one series per line) or a literal row");
  tc->add_option("--grid", trace.grid, "lo:hi:n evenly spaced inputs");
  tc->add_flag("--ucr", trace.ucr, "first field of each row is a class label");
  tc->add_option("--row", trace.row, "row of the input file")->capture_default_str();
  tc->add_option("--output", trace.output, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (an->parsed()) return dispatch([&] { return run_analyze(analyze); });
  if (tr->parsed()) {
    return dispatch([&] {
      ConfigFile cfg;
      cfg.load(train.config);
      apply_config(cfg, train, train_opts);
      return run_train(train);
    });
  }
  if (be->parsed()) {
    return dispatch([&] {
      ConfigFile cfg;
      cfg.load(bench.train.config);
      apply_config(cfg, bench.train, bench_opts);
      cfg.fill(be_acts, "activations", bench.activations);
      cfg.fill(be_data, "datasets", bench.datasets);
      cfg.fill(be_seeds, "seeds", bench.seeds);
      cfg.fill(be_jobs, "jobs", bench.jobs);
      return run_bench(bench);
    });
  }
  if (co->parsed()) return dispatch([&] { return run_compare(compare); });
  if (tc->parsed()) return dispatch([&] { return run_trace(trace); });
  return kUsage;
}
