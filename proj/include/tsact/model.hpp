#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsact/activation.hpp"
#include "tsact/array.hpp"
#include "tsact/tape.hpp"

namespace tsact {

enum class Architecture { MLP, FCN };
enum class Head { Softmax, Sigmoid };

std::string architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

enum class LayerType { Dropout, Dense, Conv, BatchNorm, Activation, GlobalAvgPool };

struct LayerSpec {
  LayerType type = LayerType::Dense;
  std::size_t units = 0;   // Dense: output width; Conv: output channels
  std::size_t kernel = 0;  // Conv only
  double p = 0.0;          // Dropout only

  static LayerSpec dropout(double p) { return {LayerType::Dropout, 0, 0, p}; }
  static LayerSpec dense(std::size_t units) { return {LayerType::Dense, units, 0, 0.0}; }
  static LayerSpec conv(std::size_t channels, std::size_t kernel) {
    return {LayerType::Conv, channels, kernel, 0.0};
  }
  static LayerSpec batch_norm() { return {LayerType::BatchNorm, 0, 0, 0.0}; }
  static LayerSpec act() { return {LayerType::Activation, 0, 0, 0.0}; }
  static LayerSpec pool() { return {LayerType::GlobalAvgPool, 0, 0, 0.0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Declarative network description. The layer list is interpreted in order;
// the final layer must be a Dense layer producing head_units() outputs.
struct ModelSpec {
  Architecture architecture = Architecture::MLP;
  ActivationKind activation;
  std::size_t input_length = 1;
  std::size_t n_classes = 2;
  bool norm_enabled = false;
  std::uint64_t seed = 0;
  Head head = Head::Sigmoid;
  std::vector<LayerSpec> layers;

  // 1 for binary problems (sigmoid head), n_classes otherwise.
  std::size_t head_units() const { return n_classes == 2 ? 1 : n_classes; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// dropout(0.1) dense(500) act, dropout(0.2) dense(500) act, dropout(0.3)
// dense(head).
ModelSpec build_mlp(std::size_t input_length, std::size_t n_classes, const ActivationKind& act);

// conv(128, 8) [bn] act, conv(256, 5) [bn] act, conv(128, 3) [bn] act,
// global average pool, dense(head). Same padding, stride 1.
ModelSpec build_fcn(std::size_t input_length, std::size_t n_classes, const ActivationKind& act,
                    bool norm_enabled = true);

ModelSpec build_model(Architecture arch, std::size_t input_length, std::size_t n_classes,
                      const ActivationKind& act, bool norm_enabled = true);

// Structural consistency check (ConfigError on failure).
void validate(const ModelSpec& spec);

// Number of trainable scalars the spec instantiates.
std::size_t parameter_count(const ModelSpec& spec);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActivationKind& kind);
ActivationKind activation_from_json(const nlohmann::json& j);

struct ModelState {
  std::vector<std::string> names;
  std::vector<Array> params;
  std::vector<BatchNormStats> norm_stats;

  const Array& param(const std::string& name) const;
  std::size_t scalar_count() const;
};

// Kaiming-uniform weights (variance 2/fan_in), zero biases, unit BN scale,
// activation parameters at the kind's value. Deterministic in (spec, seed).
ModelState init_params(const ModelSpec& spec, std::uint64_t seed);

struct ForwardOptions {
  // Force the first activation layer to emit +inf (fault injection).
  bool poison_activation = false;
};

struct ForwardPass {
  Var logits;
  std::vector<Var> params;  // tape leaves, aligned with ModelState::params
  std::vector<BatchNormStats> norm_stats;  // running stats after this pass
};

// Input is (B, L) for MLP and (B, 1, L) or (B, L) for FCN. Output logits are
// (B, head_units()).
ForwardPass forward(Tape& tape, const ModelSpec& spec, const ModelState& state,
                    const Array& input, Mode mode, Rng& rng, const ForwardOptions& opts = {});

// Cross-entropy matching the head: softmax_xent or sigmoid_bce.
Var classification_loss(Tape& tape, const ModelSpec& spec, Var logits,
                        std::span<const int> labels);

// Argmax over the softmax head (ties go to the lowest index) or threshold 0.5
// on the sigmoid head.
std::vector<int> predict_classes(const ModelSpec& spec, const Array& logits);

// Forward pass in inference mode without recording gradients.
Array infer_logits(const ModelSpec& spec, const ModelState& state, const Array& input);

}  // namespace tsact
