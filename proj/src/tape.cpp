#include "tsact/tape.hpp"

#include "tsact/error.hpp"

namespace tsact {

Var Tape::constant(Array value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::parameter(Array value) {
  Var v = push("parameter", std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::push(std::string op, Array value, std::vector<Var> inputs, BackwardFn backward) {
  const std::size_t id = nodes_.size();
  if (const auto bad = value.first_non_finite(); bad != value.size()) {
    throw NumericError("node " + std::to_string(id) + " (" + op +
                           ") produced a non-finite value at element " + std::to_string(bad),
                       static_cast<long>(id));
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var in : inputs) {
    if (in.id >= id) throw ContractError("tape input refers to a later node");
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{id};
}

Array Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Array(n.value.shape(), 0.0);
  return n.grad;
}

Array& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Array(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw ContractError("loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1) throw ContractError("loss must be a scalar");
  for (auto& n : nodes_) {
    if (!n.grad.empty()) n.grad.fill(0.0);
  }
  grad_buffer(loss.id).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (const auto bad = n.grad.first_non_finite(); bad != n.grad.size()) {
      throw NumericError("node " + std::to_string(i) + " (" + n.op +
                             ") received a non-finite gradient at element " +
                             std::to_string(bad),
                         static_cast<long>(i));
    }
    if (n.backward) n.backward(*this, i);
  }
}

std::vector<Array> gradients(const Tape& tape, std::span<const Var> params) {
  std::vector<Array> out;
  out.reserve(params.size());
  for (Var p : params) out.push_back(tape.grad(p));
  return out;
}

}  // namespace tsact
