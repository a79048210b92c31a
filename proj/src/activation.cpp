#include "tsact/activation.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tsact/error.hpp"

namespace tsact {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }
double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

const char* param_key(Activation a) noexcept {
  switch (a) {
    case Activation::ELU:
    case Activation::PReLU:
      return "alpha";
    case Activation::Snake:
      return "a";
    default:
      return nullptr;
  }
}

}  // namespace

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::TanH: return "tanh";
    case Activation::Sine: return "sine";
    case Activation::ReLU: return "relu";
    case Activation::ELU: return "elu";
    case Activation::PReLU: return "prelu";
    case Activation::GeLU: return "gelu";
    case Activation::SiLU: return "silu";
    case Activation::Snake: return "snake";
    case Activation::LeakySineLU: return "leakysinelu";
  }
  return "unknown";
}

std::vector<std::string> activation_names() {
  std::vector<std::string> out;
  for (auto a : kAllActivations) out.emplace_back(activation_name(a));
  return out;
}

Activation parse_activation(std::string_view name) {
  for (auto a : kAllActivations) {
    if (activation_name(a) == name) return a;
  }
  std::ostringstream msg;
  msg << "unknown activation '" << name << "'; expected one of:";
  for (auto a : kAllActivations) msg << ' ' << activation_name(a);
  throw ConfigError(msg.str());
}

ActivationKind::ActivationKind(Activation variant) : variant_(variant) {
  switch (variant) {
    case Activation::ELU: params_["alpha"] = {1.0, false}; break;
    case Activation::PReLU: params_["alpha"] = {0.25, true}; break;
    case Activation::Snake: params_["a"] = {1.0, false}; break;
    default: break;
  }
}

ActivationKind ActivationKind::elu(double alpha) {
  return ActivationKind(Activation::ELU).with_param(alpha);
}

ActivationKind ActivationKind::prelu(double alpha, bool learnable) {
  return ActivationKind(Activation::PReLU).with_param(alpha).with_learnable(learnable);
}

ActivationKind ActivationKind::snake(double a, bool learnable) {
  return ActivationKind(Activation::Snake).with_param(a).with_learnable(learnable);
}

std::optional<std::string> ActivationKind::param_name() const {
  if (const char* k = param_key(variant_)) return std::string(k);
  return std::nullopt;
}

double ActivationKind::param() const {
  const char* k = param_key(variant_);
  return k ? params_.at(k).value : 0.0;
}

bool ActivationKind::has_learnable_param() const {
  const char* k = param_key(variant_);
  return k && params_.at(k).learnable;
}

ActivationKind ActivationKind::with_param(double value) const {
  ActivationKind out = *this;
  if (const char* k = param_key(variant_)) {
    out.params_[k].value = value;
  } else {
    throw ConfigError(std::string(name()) + " has no parameter");
  }
  return out;
}

ActivationKind ActivationKind::with_learnable(bool learnable) const {
  ActivationKind out = *this;
  if (const char* k = param_key(variant_)) {
    out.params_[k].learnable = learnable;
  } else if (learnable) {
    throw ConfigError(std::string(name()) + " has no parameter");
  }
  return out;
}

void ActivationKind::validate() const {
  const double p = param();
  switch (variant_) {
    case Activation::ELU:
      if (!(p > 0.0) || !std::isfinite(p))
        throw ConfigError("ELU alpha must be positive and finite");
      break;
    case Activation::PReLU:
      if (!std::isfinite(p)) throw ConfigError("PReLU alpha must be finite");
      break;
    case Activation::Snake:
      if (p == 0.0 || !std::isfinite(p))
        throw ConfigError("Snake a must be finite and non-zero");
      break;
    default:
      if (!params_.empty())
        throw ConfigError(std::string(name()) + " takes no parameters");
  }
}

double activate(Activation a, double x, double p) noexcept {
  switch (a) {
    case Activation::Sigmoid: return logistic(x);
    case Activation::TanH: return std::tanh(x);
    case Activation::Sine: return std::sin(x);
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::ELU: return x > 0.0 ? x : p * std::expm1(x);
    case Activation::PReLU: return x > 0.0 ? x : p * x;
    case Activation::GeLU: return x * normal_cdf(x);
    case Activation::SiLU: return x * logistic(x);
    case Activation::Snake: {
      const double s = std::sin(p * x);
      return x + s * s / p;
    }
    case Activation::LeakySineLU: {
      const double s = std::sin(x);
      const double y = s * s + x;
      return x > 0.0 ? y : 0.5 * y;
    }
  }
  return 0.0;
}

double activate_slope(Activation a, double x, double p) noexcept {
  switch (a) {
    case Activation::Sigmoid: {
      const double s = logistic(x);
      return s * (1.0 - s);
    }
    case Activation::TanH: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Sine: return std::cos(x);
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::ELU: return x > 0.0 ? 1.0 : p * std::exp(x);
    case Activation::PReLU: return x >= 0.0 ? 1.0 : p;
    case Activation::GeLU: return normal_cdf(x) + x * normal_pdf(x);
    case Activation::SiLU: {
      const double s = logistic(x);
      return s * (1.0 + x * (1.0 - s));
    }
    case Activation::Snake: return 1.0 + std::sin(2.0 * p * x);
    case Activation::LeakySineLU: {
      const double d = std::sin(2.0 * x) + 1.0;
      return x >= 0.0 ? d : 0.5 * d;
    }
  }
  return 0.0;
}

double activate_param_slope(Activation a, double x, double p) noexcept {
  switch (a) {
    case Activation::ELU: return x > 0.0 ? 0.0 : std::expm1(x);
    case Activation::PReLU: return x > 0.0 ? 0.0 : x;
    case Activation::Snake: {
      const double s = std::sin(p * x);
      return x * std::sin(2.0 * p * x) / p - s * s / (p * p);
    }
    default: return 0.0;
  }
}

namespace {

void check_input(const ActivationKind& kind, double x) {
  if (!std::isfinite(x)) throw DomainError("activation input is not finite");
  kind.validate();
}

}  // namespace

double eval(const ActivationKind& kind, double x) {
  check_input(kind, x);
  return activate(kind.variant(), x, kind.param());
}

double derivative(const ActivationKind& kind, double x) {
  check_input(kind, x);
  return activate_slope(kind.variant(), x, kind.param());
}

double param_derivative(const ActivationKind& kind, double x) {
  check_input(kind, x);
  return activate_param_slope(kind.variant(), x, kind.param());
}

std::vector<double> kinks(const ActivationKind& kind) {
  switch (kind.variant()) {
    case Activation::ReLU:
    case Activation::LeakySineLU:
      return {0.0};
    case Activation::PReLU:
      return kind.param() == 1.0 ? std::vector<double>{} : std::vector<double>{0.0};
    case Activation::ELU:
      return kind.param() == 1.0 ? std::vector<double>{} : std::vector<double>{0.0};
    default:
      return {};
  }
}

Subdifferential subdifferential(const ActivationKind& kind, double x) {
  check_input(kind, x);
  const double p = kind.param();
  std::optional<std::pair<double, double>> sides;  // (right, left)
  if (x == 0.0) {
    switch (kind.variant()) {
      case Activation::ReLU: sides = {{1.0, 0.0}}; break;
      case Activation::PReLU: sides = {{1.0, p}}; break;
      case Activation::ELU: sides = {{1.0, p}}; break;
      // Right branch sin(0)+1, left branch (sin(0)+1)/2.
      case Activation::LeakySineLU: sides = {{1.0, 0.5}}; break;
      default: break;
    }
  }
  if (sides && sides->first != sides->second) {
    return {std::min(sides->first, sides->second), std::max(sides->first, sides->second),
            {sides->first, sides->second}};
  }
  const double g = activate_slope(kind.variant(), x, p);
  return {g, g, {g}};
}

std::string ExtendedReal::str() const {
  switch (type) {
    case Type::PosInf: return "+inf";
    case Type::NegInf: return "-inf";
    case Type::NoLimit: return "none";
    case Type::Finite: {
      std::ostringstream s;
      s << value;
      return s.str();
    }
  }
  return "none";
}

PropertyRecord catalog(const ActivationKind& kind) {
  kind.validate();
  using ER = ExtendedReal;
  PropertyRecord r;
  r.kind = kind;
  const double p = kind.param();
  switch (kind.variant()) {
    case Activation::Sigmoid:
      r.lower_limit = ER::finite(0.0);
      r.upper_limit = ER::finite(1.0);
      r.monotonic = true;
      break;
    case Activation::TanH:
      r.lower_limit = ER::finite(-1.0);
      r.upper_limit = ER::finite(1.0);
      r.monotonic = true;
      break;
    case Activation::Sine:
      r.lower_limit = ER::no_limit();
      r.upper_limit = ER::no_limit();
      r.tabulated_lower = ER::finite(0.0);
      r.tabulated_upper = ER::finite(1.0);
      r.limit_deviation = true;
      r.deviation_note =
          "tabulated as lower 0 / upper 1; sin(x) oscillates in [-1, 1] and has "
          "no limit at either tail";
      r.monotonic = false;
      r.semi_periodic_period = 2.0 * std::numbers::pi;
      return r;
    case Activation::ReLU:
      r.lower_limit = ER::finite(0.0);
      r.upper_limit = ER::pos_inf();
      r.monotonic = true;
      break;
    case Activation::ELU:
      r.lower_limit = ER::finite(-p);
      r.upper_limit = ER::pos_inf();
      r.monotonic = true;
      break;
    case Activation::PReLU:
      r.lower_limit = p > 0.0 ? ER::neg_inf() : (p == 0.0 ? ER::finite(0.0) : ER::pos_inf());
      r.upper_limit = ER::pos_inf();
      r.monotonic = p >= 0.0;
      break;
    case Activation::GeLU:
      r.lower_limit = ER::finite(0.0);
      r.upper_limit = ER::pos_inf();
      r.monotonic = false;
      break;
    case Activation::SiLU:
      r.lower_limit = ER::finite(0.0);
      r.upper_limit = ER::pos_inf();
      r.monotonic = false;
      break;
    case Activation::Snake:
      r.lower_limit = ER::neg_inf();
      r.upper_limit = ER::pos_inf();
      r.monotonic = true;
      r.semi_periodic_period = std::numbers::pi / std::abs(p);
      break;
    case Activation::LeakySineLU:
      r.lower_limit = ER::neg_inf();
      r.upper_limit = ER::pos_inf();
      r.monotonic = true;
      r.semi_periodic_period = std::numbers::pi;
      break;
  }
  r.tabulated_lower = r.lower_limit;
  r.tabulated_upper = r.upper_limit;
  return r;
}

}  // namespace tsact
