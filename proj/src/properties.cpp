#include "tsact/properties.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tsact/error.hpp"
#include "tsact/optim.hpp"
#include "tsact/tape.hpp"

namespace tsact {

std::string tail_behavior_name(TailBehavior b) {
  switch (b) {
    case TailBehavior::Converging: return "converging";
    case TailBehavior::Diverging: return "diverging";
    case TailBehavior::Oscillating: return "oscillating";
  }
  return "?";
}

namespace {

constexpr double kConvergeTol = 1e-9;
constexpr double kOscillationTol = 1e-3;

TailProbe probe_tail(const ActivationKind& kind, double sign, std::span<const double> magnitudes) {
  TailProbe p;
  for (double m : magnitudes) p.samples.push_back(eval(kind, sign * m));
  bool converging = true, diverging = true;
  for (std::size_t i = 0; i + 1 < p.samples.size(); ++i) {
    const double a = p.samples[i], b = p.samples[i + 1];
    if (std::abs(b - a) > kConvergeTol) converging = false;
    if (std::abs(b) < 10.0 * std::max(std::abs(a), 1.0)) diverging = false;
  }
  if (converging) {
    p.behavior = TailBehavior::Converging;
    p.estimate = ExtendedReal::finite(p.samples.back() + 0.0);
  } else if (diverging) {
    p.behavior = TailBehavior::Diverging;
    p.estimate = p.samples.back() > 0 ? ExtendedReal::pos_inf() : ExtendedReal::neg_inf();
  } else {
    // Neither settles nor grows; the 1e6 / 1e6+1 pair records how much it
    // wanders between neighbouring points.
    const double jump = std::abs(eval(kind, sign * 1e6) - eval(kind, sign * (1e6 + 1.0)));
    p.behavior = TailBehavior::Oscillating;
    p.estimate = ExtendedReal::no_limit();
    p.samples.push_back(jump > kOscillationTol ? jump : 0.0);
  }
  return p;
}

bool same_limit(const ExtendedReal& a, const ExtendedReal& b) {
  if (a.type != b.type) return false;
  return a.type != ExtendedReal::Type::Finite || std::abs(a.value - b.value) <= kConvergeTol;
}

std::vector<double> grid(double lo, double hi, std::size_t n, bool open_low, bool open_high) {
  std::vector<double> xs;
  xs.reserve(n);
  const std::size_t gaps = n - 1 + (open_low ? 1 : 0) + (open_high ? 1 : 0);
  const double step = (hi - lo) / static_cast<double>(gaps);
  const std::size_t first = open_low ? 1 : 0;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(lo + static_cast<double>(first + i) * step);
  return xs;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

LimitProbe check_limits(const ActivationKind& kind, std::span<const double> magnitudes) {
  if (magnitudes.size() < 2) throw ConfigError("check_limits needs at least two magnitudes");
  return {probe_tail(kind, -1.0, magnitudes), probe_tail(kind, 1.0, magnitudes)};
}

MonotoneProbe check_monotone(const ActivationKind& kind, double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw ConfigError("check_monotone needs n >= 2 and hi > lo");
  MonotoneProbe p;
  p.min_derivative = std::numeric_limits<double>::infinity();
  for (double x : grid(lo, hi, n, false, false)) {
    const double d = derivative(kind, x);
    if (d < p.min_derivative) {
      p.min_derivative = d;
      p.witness_x = x;
    }
  }
  p.monotone = p.min_derivative >= -1e-12;
  return p;
}

PeriodicityProbe check_semi_periodicity(const ActivationKind& kind, double period, double lo,
                                        double hi, std::size_t n, bool open_low, bool open_high) {
  if (!(period > 0.0)) throw ConfigError("period must be positive");
  if (n < 2 || !(hi > lo)) throw ConfigError("periodicity grid needs n >= 2 and hi > lo");
  PeriodicityProbe p;
  for (double x : grid(lo, hi, n, open_low, open_high)) {
    const double dev = std::abs(derivative(kind, x + period) - derivative(kind, x));
    if (dev > p.max_deviation) {
      p.max_deviation = dev;
      p.witness_x = x;
    }
  }
  return p;
}

namespace {

// (r x k) * (k x c)
Array matmul(const Array& a, const Array& b) {
  const std::size_t r = a.dim(0), k = a.dim(1), c = b.dim(1);
  Array out({r, c}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double v = a.at(i, p);
      for (std::size_t j = 0; j < c; ++j) out.at(i, j) += v * b.at(p, j);
    }
  return out;
}

std::vector<const DenseLayer*> dense_layers(std::span<const StackLayer> stack) {
  if (stack.empty()) throw ContractError("empty layer stack");
  std::vector<const DenseLayer*> out;
  for (const auto& l : stack) {
    if (const auto* op = std::get_if<OpaqueLayer>(&l)) {
      throw ContractError("cannot collapse a non-dense layer (" + op->kind + ")");
    }
    const auto& d = std::get<DenseLayer>(l);
    if (d.weight.rank() != 2 || d.bias.rank() != 1 || d.bias.dim(0) != d.weight.dim(1)) {
      throw ContractError("dense layer with inconsistent weight/bias shapes");
    }
    if (!out.empty() && out.back()->weight.dim(1) != d.weight.dim(0)) {
      throw ContractError("dense layer widths do not chain");
    }
    out.push_back(&d);
  }
  return out;
}

}  // namespace

DenseLayer affine_collapse(std::span<const StackLayer> stack) {
  const auto layers = dense_layers(stack);
  const std::size_t depth = layers.size();
  const std::size_t out_dim = layers.back()->weight.dim(1);

  // suffix[i] = W_{i+1} ... W_L, the map applied after layer i.
  std::vector<Array> suffix(depth);
  suffix[depth - 1] = Array({out_dim, out_dim}, 0.0);
  for (std::size_t j = 0; j < out_dim; ++j) suffix[depth - 1].at(j, j) = 1.0;
  for (std::size_t i = depth - 1; i-- > 0;) suffix[i] = matmul(layers[i + 1]->weight, suffix[i + 1]);

  DenseLayer total;
  total.weight = matmul(layers[0]->weight, suffix[0]);
  total.bias = Array({out_dim}, 0.0);
  for (std::size_t i = 0; i < depth; ++i) {
    const Array bi = layers[i]->bias.reshaped({1, layers[i]->bias.dim(0)});
    const Array contrib = matmul(bi, suffix[i]);
    for (std::size_t j = 0; j < out_dim; ++j) total.bias[j] += contrib[j];
  }
  return total;
}

Array forward_dense_stack(std::span<const StackLayer> stack, const Array& x) {
  const auto layers = dense_layers(stack);
  Array h = x.rank() == 1 ? x.reshaped({1, x.dim(0)}) : x;
  for (const auto* l : layers) {
    Array next = matmul(h, l->weight);
    for (std::size_t i = 0; i < next.dim(0); ++i)
      for (std::size_t j = 0; j < next.dim(1); ++j) next.at(i, j) += l->bias[j];
    h = std::move(next);
  }
  return h;
}

double FourierSeries::operator()(double t) const {
  double v = a0 / 2.0;
  const double w = 2.0 * std::numbers::pi * t / period;
  for (std::size_t n = 1; n <= terms(); ++n) {
    const double an = n <= a.size() ? a[n - 1] : 0.0;
    const double bn = n <= b.size() ? b[n - 1] : 0.0;
    v += an * std::cos(w * static_cast<double>(n)) + bn * std::sin(w * static_cast<double>(n));
  }
  return v;
}

FourierFitResult fourier_fit_demo(const FourierSeries& target, const FourierFitOptions& opts) {
  const std::size_t terms = std::max<std::size_t>(target.terms(), 1);
  if (terms > 8) throw ConfigError("fourier_fit_demo supports at most 8 terms");
  if (!(target.period > 0.0)) throw ConfigError("period must be positive");
  const std::size_t units = 2 * terms;
  const std::size_t S = opts.samples;

  // Inputs u = t / T over [0, 2].
  Array u({S, 1}), y({S, 1});
  for (std::size_t i = 0; i < S; ++i) {
    const double t = 2.0 * target.period * static_cast<double>(i) / static_cast<double>(S - 1);
    u[i] = t / target.period;
    y[i] = target(t);
  }

  // Each harmonic n gets a sine unit (phase 0) and a cosine unit (phase pi/2).
  Rng rng(opts.seed);
  Array freq({1, units}), phase({units}), out_w({units, 1}), out_b({1}, 0.0);
  for (std::size_t k = 0; k < units; ++k) {
    const double n = static_cast<double>(k / 2 + 1);
    freq[k] = 2.0 * std::numbers::pi * n * (1.0 + opts.frequency_jitter * rng.uniform(-1.0, 1.0));
    phase[k] = (k % 2 == 0) ? 0.0 : std::numbers::pi / 2.0;
    out_w[k] = rng.uniform(-0.1, 0.1);
  }
  std::vector<Array> params{freq, phase, out_w, out_b};
  OptimizerState opt = OptimizerState::make(OptimizerKind::Adam, OptimizerHyper::adam(opts.lr), params);

  FourierFitResult res;
  const ActivationKind sine(Activation::Sine);
  auto loss_of = [&](bool train) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    Var x = tape.constant(u);
    Var h = activation(tape, affine(tape, x, vars[0], vars[1]), sine);
    Var loss = mse(tape, affine(tape, h, vars[2], vars[3]), y);
    const double value = tape.value(loss)[0];
    if (train) {
      tape.backward(loss);
      optimizer_step(opt, params, gradients(tape, vars));
    }
    return value;
  };
  try {
    for (std::size_t step = 0; step < opts.steps; ++step) {
      const double l = loss_of(true);
      if (step % 100 == 0) res.loss_history.push_back(l);
      ++res.steps_run;
    }
    res.mse = loss_of(false);
  } catch (const NumericError&) {
    res.diverged = true;
    res.mse = std::numeric_limits<double>::infinity();
  }
  return res;
}

DeadRegionTrace dead_region_trace(const ActivationKind& kind, std::span<const double> series) {
  DeadRegionTrace out;
  std::size_t dead = 0;
  for (double x : series) {
    const double y = eval(kind, x);
    const bool d = std::abs(y) < 1e-12 && std::abs(x) >= 1e-12;
    out.activated.push_back(y);
    out.dead.push_back(d);
    dead += d ? 1 : 0;
  }
  out.dead_fraction = series.empty() ? 0.0 : static_cast<double>(dead) / static_cast<double>(series.size());
  return out;
}

bool PropertyReport::matches_catalog() const {
  for (const auto& c : checks) {
    if (!c.pass && !c.whitelisted) return false;
  }
  return true;
}

PropertyReport analyze_activation(const ActivationKind& kind) {
  PropertyReport r;
  r.kind = kind;
  r.record = catalog(kind);
  r.limits = check_limits(kind);
  r.monotone = check_monotone(kind);

  auto limit_check = [&](const char* name, const ExtendedReal& tabulated, const ExtendedReal& truth,
                         const TailProbe& probe) {
    PropertyCheck c;
    c.property = name;
    c.expected = tabulated.str();
    c.observed = probe.estimate.str() + " (" + tail_behavior_name(probe.behavior) + ")";
    c.pass = same_limit(tabulated, probe.estimate);
    c.whitelisted = !c.pass && r.record.limit_deviation && same_limit(truth, probe.estimate);
    r.checks.push_back(c);
  };
  limit_check("lower_limit", r.record.tabulated_lower, r.record.lower_limit, r.limits.negative);
  limit_check("upper_limit", r.record.tabulated_upper, r.record.upper_limit, r.limits.positive);

  PropertyCheck mono;
  mono.property = "monotonic";
  mono.expected = r.record.monotonic ? "true" : "false";
  mono.observed = std::string(r.monotone.monotone ? "true" : "false") +
                  " (min derivative " + fmt(r.monotone.min_derivative) + " at x=" +
                  fmt(r.monotone.witness_x) + ")";
  mono.pass = r.monotone.monotone == r.record.monotonic;
  r.checks.push_back(mono);

  if (r.record.semi_periodic_period) {
    const double T = *r.record.semi_periodic_period;
    // LeakySineLU is periodic in the derivative only within each sign branch.
    std::vector<PeriodicityProbe> probes;
    if (kind.variant() == Activation::LeakySineLU) {
      probes.push_back(check_semi_periodicity(kind, T, 0.0, 20.0, 1000, true, false));
      probes.push_back(check_semi_periodicity(kind, T, -20.0, -T, 1000, false, true));
    } else {
      probes.push_back(check_semi_periodicity(kind, T, -20.0, 20.0, 1000));
    }
    PeriodicityProbe worst = probes.front();
    for (const auto& p : probes) {
      if (p.max_deviation > worst.max_deviation) worst = p;
    }
    r.periodicity = worst;
    PropertyCheck per;
    per.property = "semi_periodic";
    per.expected = "period " + fmt(T) + ", deviation < 1e-12";
    per.observed = "max deviation " + fmt(worst.max_deviation);
    per.pass = worst.max_deviation < 1e-12;
    r.checks.push_back(per);
  }
  return r;
}

namespace {

nlohmann::json to_json(const ExtendedReal& e) {
  if (e.type == ExtendedReal::Type::Finite) return e.value;
  return e.str();
}

nlohmann::json to_json(const TailProbe& p) {
  return {{"behavior", tail_behavior_name(p.behavior)},
          {"estimate", to_json(p.estimate)},
          {"samples", p.samples}};
}

}  // namespace

nlohmann::json to_json(const PropertyReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"property", c.property},
                      {"expected", c.expected},
                      {"observed", c.observed},
                      {"pass", c.pass},
                      {"whitelisted", c.whitelisted}});
  }
  nlohmann::json j = {
      {"activation", std::string(r.kind.name())},
      {"catalog",
       {{"lower_limit", to_json(r.record.lower_limit)},
        {"upper_limit", to_json(r.record.upper_limit)},
        {"tabulated_lower", to_json(r.record.tabulated_lower)},
        {"tabulated_upper", to_json(r.record.tabulated_upper)},
        {"limit_deviation", r.record.limit_deviation},
        {"deviation_note", r.record.deviation_note},
        {"monotonic", r.record.monotonic}}},
      {"limit_neg", to_json(r.limits.negative)},
      {"limit_pos", to_json(r.limits.positive)},
      {"monotone",
       {{"verdict", r.monotone.monotone},
        {"min_derivative", r.monotone.min_derivative},
        {"witness_x", r.monotone.witness_x}}},
      {"checks", checks},
      {"matches_catalog", r.matches_catalog()}};
  if (r.record.semi_periodic_period) {
    j["catalog"]["semi_periodic_period"] = *r.record.semi_periodic_period;
  }
  if (r.periodicity) {
    j["semi_periodic"] = {{"max_deviation", r.periodicity->max_deviation},
                          {"witness_x", r.periodicity->witness_x},
                          {"verdict", r.periodicity->max_deviation < 1e-12}};
  }
  return j;
}

std::string to_csv(std::span<const PropertyReport> reports) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::ostringstream out;
  out << "kind,property,expected,observed,pass,whitelisted\n";
  for (const auto& r : reports) {
    for (const auto& c : r.checks) {
      out << r.kind.name() << ',' << c.property << ',' << quote(c.expected) << ','
          << quote(c.observed) << ',' << (c.pass ? "true" : "false") << ','
          << (c.whitelisted ? "true" : "false") << '\n';
    }
  }
  return out.str();
}

}  // namespace tsact
