#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsact/activation.hpp"
#include "tsact/array.hpp"

namespace tsact {

enum class Mode { Train, Infer };

// Handle to a node on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
};

// Append-only record of a forward computation. Nodes are stored in creation
// order, which is a topological order: every input of node k has an id < k.
// Every pushed value must be finite; a non-finite value raises NumericError
// naming the node.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    std::string op;
    Array value;
    Array grad;  // empty until a gradient reaches the node
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  Var constant(Array value);
  // Leaf whose gradient is collected by backward().
  Var parameter(Array value);

  Var push(std::string op, Array value, std::vector<Var> inputs, BackwardFn backward);

  const Array& value(Var v) const { return nodes_.at(v.id).value; }
  // Gradient of the last backward() target w.r.t. v; zeros if none reached v.
  Array grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of node `id`, allocated as zeros on first use. For use in
  // backward rules.
  Array& grad_buffer(std::size_t id);
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse sweep from a scalar node. Each node is visited once, in reverse
  // creation order. Throws NumericError if a non-finite gradient appears.
  void backward(Var loss);

 private:
  std::vector<Node> nodes_;
};

// Gradients of the most recent backward() for each listed leaf, in order.
std::vector<Array> gradients(const Tape& tape, std::span<const Var> params);

// Running statistics of one batch-normalization layer.
struct BatchNormStats {
  Array mean;
  Array var;
  explicit BatchNormStats(std::size_t channels = 1)
      : mean({channels}, 0.0), var({channels}, 1.0) {}
};

// out[i,j] = sum_k x[i,k] * W[k,j] + b[j]
Var affine(Tape& tape, Var x, Var weight, Var bias);

// Same-padded stride-1 cross-correlation. x (B, Cin, L), kernel (Cout, Cin, K),
// bias (Cout). Zero padding floor((K-1)/2) on the left, ceil((K-1)/2) on the
// right, so the output is (B, Cout, L).
Var conv1d_same(Tape& tape, Var x, Var kernel, Var bias);

// (B, C, L) -> (B, C), mean over L.
Var global_avg_pool(Tape& tape, Var x);

// Per-channel normalization over (B, L) for x of shape (B, C, L) or over B
// for (B, C). In Train mode batch statistics are used (biased variance) and
// `stats` is updated with `momentum` (unbiased variance); in Infer mode the
// running statistics are used and `stats` is not touched.
Var batch_norm1d(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode,
                 double momentum = 0.1, double eps = 1e-5);

// Inverted dropout: in Train mode each element is zeroed with probability p
// and survivors are scaled by 1/(1-p); identity in Infer mode.
Var dropout(Tape& tape, Var x, double p, Mode mode, Rng& rng);

// Elementwise activation. When `channel_param` is given it must have shape
// (C) with C = x.dim(1) and supplies the variant parameter per channel
// (per neuron for 2-D inputs); its gradient is accumulated. Otherwise the
// kind's scalar parameter is used. With `poison` set every output is +inf,
// which trips the tape's finiteness check (fault injection).
Var activation(Tape& tape, Var x, const ActivationKind& kind,
               std::optional<Var> channel_param = std::nullopt, bool poison = false);

// Mean over the batch of -log softmax(logits)[label]. logits (B, C), C >= 2.
Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels);

// Mean binary cross-entropy of sigmoid(logit). logit (B, 1), labels in {0,1}.
Var sigmoid_bce(Tape& tape, Var logit, std::span<const int> labels);

// Mean squared error against a fixed target of the same size.
Var mse(Tape& tape, Var pred, const Array& target);

// Sum of all elements, as a (1) array.
Var sum(Tape& tape, Var x);

// Row-wise softmax of a (B, C) array, max-subtracted.
Array softmax(const Array& logits);

}  // namespace tsact
