#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "tsact/activation.hpp"
#include "tsact/array.hpp"

namespace tsact {

// ---- limits -----------------------------------------------------------------

enum class TailBehavior { Converging, Diverging, Oscillating };
std::string tail_behavior_name(TailBehavior b);

struct TailProbe {
  TailBehavior behavior = TailBehavior::Oscillating;
  ExtendedReal estimate;        // limit estimate (value, +-inf or none)
  std::vector<double> samples;  // sigma at the probe magnitudes
};

struct LimitProbe {
  TailProbe negative;
  TailProbe positive;
};

// Probes sigma at -m and +m for each magnitude. A tail converges when
// successive probes agree within 1e-9, diverges when |sigma| keeps growing
// by at least a factor 10 between probes, and oscillates when sigma at
// 1e6 and 1e6 + 1 differ by more than 1e-3 (or neither of the above holds).
LimitProbe check_limits(const ActivationKind& kind,
                        std::span<const double> magnitudes = std::vector<double>{1e3, 1e6, 1e9});

// ---- monotonicity / semi-periodicity ---------------------------------------

struct MonotoneProbe {
  bool monotone = true;
  double min_derivative = 0.0;
  double witness_x = 0.0;  // grid point attaining min_derivative
};

// Samples sigma' on an n-point uniform grid over [lo, hi]; monotone iff the
// minimum is >= -1e-12.
MonotoneProbe check_monotone(const ActivationKind& kind, double lo = -20.0, double hi = 20.0,
                             std::size_t n = 10000);

struct PeriodicityProbe {
  double max_deviation = 0.0;
  double witness_x = 0.0;
};

// max |sigma'(x + T) - sigma'(x)| on an n-point grid over [lo, hi]. With
// `open_low` the grid excludes lo (x_i = lo + i (hi - lo) / n, i = 1..n);
// with `open_high` it excludes hi.
PeriodicityProbe check_semi_periodicity(const ActivationKind& kind, double period, double lo,
                                        double hi, std::size_t n = 1000, bool open_low = false,
                                        bool open_high = false);

// ---- affine collapse ---------------------------------------------------------

// y = x W + b with W (in, out), b (out).
struct DenseLayer {
  Array weight;
  Array bias;
};

// Any layer the collapse cannot fold (dropout, nonlinear activation, ...).
struct OpaqueLayer {
  std::string kind;
};

using StackLayer = std::variant<DenseLayer, OpaqueLayer>;

// Total map of a stack of dense layers with identity activations:
// W_total = W_1 W_2 ... W_L and b_total = sum_i b_i W_{i+1} ... W_L (row
// vector convention). Throws ContractError on an opaque layer or mismatched
// widths.
DenseLayer affine_collapse(std::span<const StackLayer> stack);

// Layer-by-layer evaluation of an identity-activation dense stack.
Array forward_dense_stack(std::span<const StackLayer> stack, const Array& x);

// ---- Fourier demonstration ---------------------------------------------------

// x(t) = a0/2 + sum_n a_n cos(2 pi n t / T) + b_n sin(2 pi n t / T)
struct FourierSeries {
  double a0 = 0.0;
  std::vector<double> a;
  std::vector<double> b;
  double period = 1.0;

  double operator()(double t) const;
  std::size_t terms() const { return std::max(a.size(), b.size()); }
};

struct FourierFitOptions {
  std::size_t steps = 5000;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::size_t samples = 200;
  // Relative jitter applied to the harmonic initial frequencies.
  double frequency_jitter = 0.05;
};

struct FourierFitResult {
  double mse = 0.0;
  bool diverged = false;
  std::size_t steps_run = 0;
  std::vector<double> loss_history;  // every 100 steps
};

// Trains output = bias + sum_k w_k sin(u * f_k + phi_k) with 2N sine units
// (u = t / T) by Adam on samples of the target over [0, 2T].
FourierFitResult fourier_fit_demo(const FourierSeries& target, const FourierFitOptions& opts = {});

// ---- dead regions ------------------------------------------------------------

struct DeadRegionTrace {
  std::vector<double> activated;
  std::vector<bool> dead;
  double dead_fraction = 0.0;
};

// Applies sigma elementwise; an output is dead when |sigma(x)| < 1e-12 while
// |x| >= 1e-12.
DeadRegionTrace dead_region_trace(const ActivationKind& kind, std::span<const double> series);

// ---- reports -------------------------------------------------------------------

struct PropertyCheck {
  std::string property;
  std::string expected;
  std::string observed;
  bool pass = false;
  bool whitelisted = false;  // known, documented deviation
};

struct PropertyReport {
  ActivationKind kind;
  PropertyRecord record;
  LimitProbe limits;
  MonotoneProbe monotone;
  std::optional<PeriodicityProbe> periodicity;  // only when a period exists
  std::vector<PropertyCheck> checks;

  bool matches_catalog() const;  // whitelisted failures allowed
};

PropertyReport analyze_activation(const ActivationKind& kind);

nlohmann::json to_json(const PropertyReport& r);
// CSV with header kind,property,expected,observed,pass,whitelisted.
std::string to_csv(std::span<const PropertyReport> reports);

}  // namespace tsact
