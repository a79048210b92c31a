#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tsact {

enum class Activation {
  Sigmoid,
  TanH,
  Sine,
  ReLU,
  ELU,
  PReLU,
  GeLU,
  SiLU,
  Snake,
  LeakySineLU,
};

inline constexpr std::array<Activation, 10> kAllActivations = {
    Activation::Sigmoid, Activation::TanH,  Activation::Sine,
    Activation::ReLU,    Activation::ELU,   Activation::PReLU,
    Activation::GeLU,    Activation::SiLU,  Activation::Snake,
    Activation::LeakySineLU,
};

// Canonical lowercase name ("leakysinelu", "prelu", ...).
std::string_view activation_name(Activation a);
// Throws ConfigError listing the valid names when `name` is unknown.
Activation parse_activation(std::string_view name);
std::vector<std::string> activation_names();

struct ActivationParam {
  double value = 0.0;
  bool learnable = false;
  friend bool operator==(const ActivationParam&, const ActivationParam&) = default;
};

// An activation variant together with its scalar parameters.
//
//   ELU    "alpha" (default 1, fixed)
//   PReLU  "alpha" (default 0.25, learnable; one per neuron / channel when
//          used inside a network)
//   Snake  "a"     (default 1, fixed unless requested)
//
// All other variants carry an empty parameter map.
class ActivationKind {
 public:
  ActivationKind() : ActivationKind(Activation::LeakySineLU) {}
  // Default parameters for the variant.
  ActivationKind(Activation variant);  // NOLINT(implicit)

  static ActivationKind elu(double alpha = 1.0);
  static ActivationKind prelu(double alpha = 0.25, bool learnable = true);
  static ActivationKind snake(double a = 1.0, bool learnable = false);
  static ActivationKind from_name(std::string_view name) {
    return ActivationKind(parse_activation(name));
  }

  Activation variant() const noexcept { return variant_; }
  std::string_view name() const noexcept { return activation_name(variant_); }
  const std::map<std::string, ActivationParam>& params() const noexcept {
    return params_;
  }

  // Name of the variant's single parameter ("alpha" / "a"), if any.
  std::optional<std::string> param_name() const;
  // Value of the variant's parameter; 0 for non-parametric variants.
  double param() const;
  bool has_learnable_param() const;

  ActivationKind with_param(double value) const;
  ActivationKind with_learnable(bool learnable) const;

  // Throws ConfigError when ELU alpha <= 0, Snake a == 0, or PReLU alpha is
  // not finite.
  void validate() const;

  friend bool operator==(const ActivationKind&, const ActivationKind&) = default;

 private:
  Activation variant_;
  std::map<std::string, ActivationParam> params_;
};

// Raw scalar kernels. `p` is the variant parameter (ELU/PReLU alpha, Snake a)
// and is ignored elsewhere. No validation: these run inside the network hot
// loops, where finiteness is checked per array.
double activate(Activation a, double x, double p) noexcept;
double activate_slope(Activation a, double x, double p) noexcept;
// d sigma / d p, zero for non-parametric variants.
double activate_param_slope(Activation a, double x, double p) noexcept;

// Checked evaluation. Throws DomainError on non-finite x and ConfigError on
// invalid parameters.
double eval(const ActivationKind& kind, double x);

// sigma'(x). At kinks the canonical sub-gradient is returned:
// LeakySineLU'(0) = 1, ReLU'(0) = 0, PReLU'(0) = 1.
double derivative(const ActivationKind& kind, double x);

// d sigma / d parameter at x (PReLU alpha, Snake a, ELU alpha).
double param_derivative(const ActivationKind& kind, double x);

// Set of generalized derivatives at x. At a smooth point lower == upper and
// `one_sided` holds the single value. At a kink `one_sided` holds the
// right-hand then the left-hand derivative and [lower, upper] is their hull.
struct Subdifferential {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> one_sided;
  bool is_kink() const noexcept { return lower != upper; }
  bool contains(double g) const noexcept { return g >= lower && g <= upper; }
};

Subdifferential subdifferential(const ActivationKind& kind, double x);

// Points where the variant is not differentiable (for the given parameter).
std::vector<double> kinks(const ActivationKind& kind);

// Limit of sigma at +-infinity: a finite value, +-infinity, or no limit.
struct ExtendedReal {
  enum class Type { Finite, PosInf, NegInf, NoLimit };
  Type type = Type::NoLimit;
  double value = 0.0;

  static ExtendedReal finite(double v) { return {Type::Finite, v}; }
  static ExtendedReal pos_inf() { return {Type::PosInf, 0.0}; }
  static ExtendedReal neg_inf() { return {Type::NegInf, 0.0}; }
  static ExtendedReal no_limit() { return {Type::NoLimit, 0.0}; }

  std::string str() const;
  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;
};

struct PropertyRecord {
  ActivationKind kind;
  // Mathematically correct limits.
  ExtendedReal lower_limit;
  ExtendedReal upper_limit;
  // Limits as tabulated in the published comparison table. They differ from
  // the true limits only for Sine, where the table lists 0 and 1.
  ExtendedReal tabulated_lower;
  ExtendedReal tabulated_upper;
  bool limit_deviation = false;
  std::string deviation_note;
  bool monotonic = false;
  // Period of sigma' where it exists (for LeakySineLU on each sign branch).
  std::optional<double> semi_periodic_period;
};

PropertyRecord catalog(const ActivationKind& kind);

}  // namespace tsact
