#include "tsact/optim.hpp"

#include <cmath>

#include "tsact/error.hpp"

namespace tsact {

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "adadelta";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adadelta") return OptimizerKind::Adadelta;
  throw ConfigError("unknown optimizer '" + name + "' (adam, adadelta)");
}

OptimizerState OptimizerState::make(OptimizerKind kind, OptimizerHyper hyper,
                                    const std::vector<Array>& params) {
  OptimizerState s;
  s.kind = kind;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.first.emplace_back(p.shape(), 0.0);
    s.second.emplace_back(p.shape(), 0.0);
  }
  return s;
}

namespace {

void check_shapes(const OptimizerState& s, const std::vector<Array>& params,
                  const std::vector<Array>& grads) {
  if (params.size() != grads.size() || params.size() != s.first.size() ||
      params.size() != s.second.size()) {
    throw ShapeError("optimizer: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].shape() != s.first[i].shape() ||
        params[i].shape() != s.second[i].shape()) {
      throw ShapeError("optimizer: shape mismatch for parameter " + std::to_string(i));
    }
  }
}

}  // namespace

void adam_step(OptimizerState& state, std::vector<Array>& params,
               const std::vector<Array>& grads) {
  check_shapes(state, params, grads);
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array& p = params[i];
    Array& m = state.first[i];
    Array& v = state.second[i];
    const Array& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double mhat = m[j] / bias1;
      const double vhat = v[j] / bias2;
      p[j] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

void adadelta_step(OptimizerState& state, std::vector<Array>& params,
                   const std::vector<Array>& grads) {
  check_shapes(state, params, grads);
  const auto& h = state.hyper;
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array& p = params[i];
    Array& sq_grad = state.first[i];
    Array& sq_delta = state.second[i];
    const Array& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      sq_grad[j] = h.rho * sq_grad[j] + (1.0 - h.rho) * g[j] * g[j];
      const double delta = std::sqrt(sq_delta[j] + h.eps) / std::sqrt(sq_grad[j] + h.eps) * g[j];
      sq_delta[j] = h.rho * sq_delta[j] + (1.0 - h.rho) * delta * delta;
      p[j] -= h.lr * delta;
    }
  }
}

void optimizer_step(OptimizerState& state, std::vector<Array>& params,
                    const std::vector<Array>& grads) {
  if (state.kind == OptimizerKind::Adam) {
    adam_step(state, params, grads);
  } else {
    adadelta_step(state, params, grads);
  }
}

}  // namespace tsact
