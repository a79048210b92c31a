#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsact/array.hpp"

namespace tsact {

enum class OptimizerKind { Adam, Adadelta };

std::string optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerHyper {
  double lr = 1e-3;
  double beta1 = 0.9;    // Adam
  double beta2 = 0.999;  // Adam
  double rho = 0.9;      // Adadelta
  double eps = 1e-8;

  static OptimizerHyper adam(double lr = 1e-3) { return {lr, 0.9, 0.999, 0.9, 1e-8}; }
  static OptimizerHyper adadelta(double lr = 1.0) { return {lr, 0.9, 0.999, 0.9, 1e-6}; }
};

// Accumulators for one optimizer run. `first`/`second` hold, per parameter:
//   Adam      first moment m, second moment v
//   Adadelta  running E[g^2], running E[dx^2]
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  OptimizerHyper hyper;
  std::uint64_t step = 0;
  std::vector<Array> first;
  std::vector<Array> second;

  static OptimizerState make(OptimizerKind kind, OptimizerHyper hyper,
                             const std::vector<Array>& params);
};

// Both steps update `params` in place and advance state.step. Shapes of
// params, grads and accumulators must agree (ShapeError otherwise).
void adam_step(OptimizerState& state, std::vector<Array>& params, const std::vector<Array>& grads);
void adadelta_step(OptimizerState& state, std::vector<Array>& params,
                   const std::vector<Array>& grads);
// Dispatches on state.kind.
void optimizer_step(OptimizerState& state, std::vector<Array>& params,
                    const std::vector<Array>& grads);

}  // namespace tsact
