#include "tsact/model.hpp"

#include <algorithm>
#include <cmath>

#include "tsact/error.hpp"

namespace tsact {

std::string architecture_name(Architecture a) { return a == Architecture::MLP ? "mlp" : "fcn"; }

Architecture parse_architecture(const std::string& name) {
  if (name == "mlp") return Architecture::MLP;
  if (name == "fcn") return Architecture::FCN;
  throw ConfigError("unknown architecture '" + name + "' (mlp, fcn)");
}

namespace {

void check_sizes(std::size_t input_length, std::size_t n_classes) {
  if (input_length < 1) throw ConfigError("input_length must be >= 1");
  if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
}

const char* layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::Dropout: return "dropout";
    case LayerType::Dense: return "dense";
    case LayerType::Conv: return "conv";
    case LayerType::BatchNorm: return "batch_norm";
    case LayerType::Activation: return "activation";
    case LayerType::GlobalAvgPool: return "global_avg_pool";
  }
  return "?";
}

LayerType parse_layer_type(const std::string& s) {
  for (auto t : {LayerType::Dropout, LayerType::Dense, LayerType::Conv, LayerType::BatchNorm,
                 LayerType::Activation, LayerType::GlobalAvgPool}) {
    if (s == layer_type_name(t)) return t;
  }
  throw ConfigError("unknown layer type '" + s + "'");
}

// Shape bookkeeping shared by init, validation and forward.
struct Walker {
  bool conv_layout;        // true while activations are (B, C, L)
  std::size_t features;    // width (dense layout) or channels (conv layout)
  std::size_t length;
};

Walker start_walk(const ModelSpec& spec) {
  if (spec.architecture == Architecture::FCN) return {true, 1, spec.input_length};
  return {false, spec.input_length, 1};
}

}  // namespace

ModelSpec build_mlp(std::size_t input_length, std::size_t n_classes, const ActivationKind& act) {
  check_sizes(input_length, n_classes);
  act.validate();
  ModelSpec s;
  s.architecture = Architecture::MLP;
  s.activation = act;
  s.input_length = input_length;
  s.n_classes = n_classes;
  s.norm_enabled = false;
  s.head = n_classes == 2 ? Head::Sigmoid : Head::Softmax;
  s.layers = {LayerSpec::dropout(0.1), LayerSpec::dense(500), LayerSpec::act(),
              LayerSpec::dropout(0.2), LayerSpec::dense(500), LayerSpec::act(),
              LayerSpec::dropout(0.3), LayerSpec::dense(s.head_units())};
  return s;
}

ModelSpec build_fcn(std::size_t input_length, std::size_t n_classes, const ActivationKind& act,
                    bool norm_enabled) {
  check_sizes(input_length, n_classes);
  act.validate();
  ModelSpec s;
  s.architecture = Architecture::FCN;
  s.activation = act;
  s.input_length = input_length;
  s.n_classes = n_classes;
  s.norm_enabled = norm_enabled;
  s.head = n_classes == 2 ? Head::Sigmoid : Head::Softmax;
  const std::pair<std::size_t, std::size_t> blocks[] = {{128, 8}, {256, 5}, {128, 3}};
  for (auto [channels, kernel] : blocks) {
    s.layers.push_back(LayerSpec::conv(channels, kernel));
    if (norm_enabled) s.layers.push_back(LayerSpec::batch_norm());
    s.layers.push_back(LayerSpec::act());
  }
  s.layers.push_back(LayerSpec::pool());
  s.layers.push_back(LayerSpec::dense(s.head_units()));
  return s;
}

ModelSpec build_model(Architecture arch, std::size_t input_length, std::size_t n_classes,
                      const ActivationKind& act, bool norm_enabled) {
  return arch == Architecture::MLP ? build_mlp(input_length, n_classes, act)
                                   : build_fcn(input_length, n_classes, act, norm_enabled);
}

void validate(const ModelSpec& spec) {
  check_sizes(spec.input_length, spec.n_classes);
  spec.activation.validate();
  if ((spec.head == Head::Sigmoid) != (spec.n_classes == 2)) {
    throw ConfigError("sigmoid head is required exactly for binary problems");
  }
  if (spec.layers.empty() || spec.layers.back().type != LayerType::Dense ||
      spec.layers.back().units != spec.head_units()) {
    throw ConfigError("the last layer must be dense with " + std::to_string(spec.head_units()) +
                      " units");
  }
  Walker w = start_walk(spec);
  for (const auto& l : spec.layers) {
    switch (l.type) {
      case LayerType::Dropout:
        if (!(l.p >= 0.0 && l.p < 1.0)) throw ConfigError("dropout p must be in [0, 1)");
        break;
      case LayerType::Dense:
        if (w.conv_layout) throw ConfigError("dense layer applied to a (B, C, L) activation");
        if (l.units == 0) throw ConfigError("dense layer needs units > 0");
        w.features = l.units;
        break;
      case LayerType::Conv:
        if (!w.conv_layout) throw ConfigError("conv layer applied to a (B, F) activation");
        if (l.units == 0 || l.kernel == 0) throw ConfigError("conv layer needs channels and kernel");
        w.features = l.units;
        break;
      case LayerType::BatchNorm:
      case LayerType::Activation:
        break;
      case LayerType::GlobalAvgPool:
        if (!w.conv_layout) throw ConfigError("pooling applied to a (B, F) activation");
        w.conv_layout = false;
        break;
    }
  }
}

std::size_t parameter_count(const ModelSpec& spec) {
  validate(spec);
  Walker w = start_walk(spec);
  std::size_t n = 0;
  for (const auto& l : spec.layers) {
    switch (l.type) {
      case LayerType::Dense:
        n += w.features * l.units + l.units;
        w.features = l.units;
        break;
      case LayerType::Conv:
        n += l.units * w.features * l.kernel + l.units;
        w.features = l.units;
        break;
      case LayerType::BatchNorm:
        n += 2 * w.features;
        break;
      case LayerType::Activation:
        if (spec.activation.has_learnable_param()) n += w.features;
        break;
      case LayerType::GlobalAvgPool:
        w.conv_layout = false;
        break;
      case LayerType::Dropout:
        break;
    }
  }
  return n;
}

nlohmann::json to_json(const ActivationKind& kind) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, p] : kind.params()) {
    params[name] = {{"value", p.value}, {"learnable", p.learnable}};
  }
  return {{"name", std::string(kind.name())}, {"params", params}};
}

ActivationKind activation_from_json(const nlohmann::json& j) {
  if (j.is_string()) return ActivationKind::from_name(j.get<std::string>());
  ActivationKind k = ActivationKind::from_name(j.at("name").get<std::string>());
  if (j.contains("params")) {
    for (const auto& [name, p] : j.at("params").items()) {
      if (k.param_name() != name) throw ConfigError("unexpected activation parameter " + name);
      k = k.with_param(p.at("value").get<double>()).with_learnable(p.at("learnable").get<bool>());
    }
  }
  k.validate();
  return k;
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json e = {{"type", layer_type_name(l.type)}};
    if (l.type == LayerType::Dense) e["units"] = l.units;
    if (l.type == LayerType::Conv) {
      e["channels"] = l.units;
      e["kernel"] = l.kernel;
    }
    if (l.type == LayerType::Dropout) e["p"] = l.p;
    layers.push_back(e);
  }
  return {{"architecture", architecture_name(spec.architecture)},
          {"activation", to_json(spec.activation)},
          {"input_length", spec.input_length},
          {"n_classes", spec.n_classes},
          {"norm_enabled", spec.norm_enabled},
          {"seed", spec.seed},
          {"head", spec.head == Head::Sigmoid ? "sigmoid" : "softmax"},
          {"layers", layers}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec s;
    s.architecture = parse_architecture(j.at("architecture").get<std::string>());
    s.activation = activation_from_json(j.at("activation"));
    s.input_length = j.at("input_length").get<std::size_t>();
    s.n_classes = j.at("n_classes").get<std::size_t>();
    s.norm_enabled = j.at("norm_enabled").get<bool>();
    s.seed = j.value("seed", std::uint64_t{0});
    const auto head = j.at("head").get<std::string>();
    if (head != "sigmoid" && head != "softmax") throw ConfigError("unknown head '" + head + "'");
    s.head = head == "sigmoid" ? Head::Sigmoid : Head::Softmax;
    for (const auto& e : j.at("layers")) {
      LayerSpec l;
      l.type = parse_layer_type(e.at("type").get<std::string>());
      if (l.type == LayerType::Dense) l.units = e.at("units").get<std::size_t>();
      if (l.type == LayerType::Conv) {
        l.units = e.at("channels").get<std::size_t>();
        l.kernel = e.at("kernel").get<std::size_t>();
      }
      if (l.type == LayerType::Dropout) l.p = e.at("p").get<double>();
      s.layers.push_back(l);
    }
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
}

const Array& ModelState::param(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return params[i];
  }
  throw ContractError("no parameter named '" + name + "'");
}

std::size_t ModelState::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

ModelState init_params(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  ModelState st;
  auto add = [&](std::string name, Array a) {
    st.names.push_back(std::move(name));
    st.params.push_back(std::move(a));
  };
  auto kaiming = [&](Shape shape, std::size_t fan_in) {
    Array a(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : a.data()) v = rng.uniform(-bound, bound);
    return a;
  };
  Walker w = start_walk(spec);
  std::size_t dense_i = 0, conv_i = 0, bn_i = 0, act_i = 0;
  for (const auto& l : spec.layers) {
    switch (l.type) {
      case LayerType::Dense: {
        const std::string p = "dense" + std::to_string(dense_i++);
        add(p + ".weight", kaiming({w.features, l.units}, w.features));
        add(p + ".bias", Array({l.units}, 0.0));
        w.features = l.units;
        break;
      }
      case LayerType::Conv: {
        const std::string p = "conv" + std::to_string(conv_i++);
        add(p + ".weight", kaiming({l.units, w.features, l.kernel}, w.features * l.kernel));
        add(p + ".bias", Array({l.units}, 0.0));
        w.features = l.units;
        break;
      }
      case LayerType::BatchNorm: {
        const std::string p = "bn" + std::to_string(bn_i++);
        add(p + ".gamma", Array({w.features}, 1.0));
        add(p + ".beta", Array({w.features}, 0.0));
        st.norm_stats.emplace_back(w.features);
        break;
      }
      case LayerType::Activation:
        if (spec.activation.has_learnable_param()) {
          add("act" + std::to_string(act_i) + "." + *spec.activation.param_name(),
              Array({w.features}, spec.activation.param()));
        }
        ++act_i;
        break;
      case LayerType::GlobalAvgPool:
        w.conv_layout = false;
        break;
      case LayerType::Dropout:
        break;
    }
  }
  return st;
}

ForwardPass forward(Tape& tape, const ModelSpec& spec, const ModelState& state,
                    const Array& input, Mode mode, Rng& rng, const ForwardOptions& opts) {
  ForwardPass out;
  out.norm_stats = state.norm_stats;
  Array x = input;
  if (spec.architecture == Architecture::FCN) {
    if (x.rank() == 2) x = x.reshaped({x.dim(0), 1, x.dim(1)});
    if (x.rank() != 3 || x.dim(1) != 1 || x.dim(2) != spec.input_length) {
      throw ShapeError("FCN expects (B, 1, " + std::to_string(spec.input_length) + "), got " +
                       shape_str(input.shape()));
    }
  } else if (x.rank() != 2 || x.dim(1) != spec.input_length) {
    throw ShapeError("MLP expects (B, " + std::to_string(spec.input_length) + "), got " +
                     shape_str(input.shape()));
  }
  for (const auto& p : state.params) out.params.push_back(tape.parameter(p));

  Var v = tape.constant(std::move(x));
  std::size_t pi = 0, bn_i = 0;
  bool poisoned = false;
  auto next_param = [&]() {
    if (pi >= out.params.size()) throw ContractError("model state has too few parameters");
    return out.params[pi++];
  };
  for (const auto& l : spec.layers) {
    switch (l.type) {
      case LayerType::Dropout:
        v = dropout(tape, v, l.p, mode, rng);
        break;
      case LayerType::Dense: {
        Var W = next_param();
        Var b = next_param();
        v = affine(tape, v, W, b);
        break;
      }
      case LayerType::Conv: {
        Var k = next_param();
        Var b = next_param();
        v = conv1d_same(tape, v, k, b);
        break;
      }
      case LayerType::BatchNorm: {
        Var g = next_param();
        Var b = next_param();
        if (bn_i >= out.norm_stats.size()) throw ContractError("missing normalization statistics");
        v = batch_norm1d(tape, v, g, b, out.norm_stats[bn_i++], mode);
        break;
      }
      case LayerType::Activation: {
        std::optional<Var> p;
        if (spec.activation.has_learnable_param()) p = next_param();
        const bool poison = opts.poison_activation && !poisoned;
        poisoned = poisoned || poison;
        v = activation(tape, v, spec.activation, p, poison);
        break;
      }
      case LayerType::GlobalAvgPool:
        v = global_avg_pool(tape, v);
        break;
    }
  }
  if (pi != out.params.size()) throw ContractError("model state has unused parameters");
  out.logits = v;
  return out;
}

Var classification_loss(Tape& tape, const ModelSpec& spec, Var logits,
                        std::span<const int> labels) {
  return spec.head == Head::Sigmoid ? sigmoid_bce(tape, logits, labels)
                                    : softmax_xent(tape, logits, labels);
}

std::vector<int> predict_classes(const ModelSpec& spec, const Array& logits) {
  if (logits.rank() != 2 || logits.dim(1) != spec.head_units()) {
    throw ContractError("logits shape " + shape_str(logits.shape()) + " does not match the head");
  }
  const std::size_t B = logits.dim(0), H = logits.dim(1);
  std::vector<int> out(B);
  for (std::size_t i = 0; i < B; ++i) {
    if (spec.head == Head::Sigmoid) {
      // sigmoid(z) > 0.5 <=> z > 0; an exact 0.5 goes to class 0.
      out[i] = logits[i] > 0.0 ? 1 : 0;
    } else {
      const double* row = logits.ptr() + i * H;
      out[i] = static_cast<int>(std::max_element(row, row + H) - row);
    }
  }
  return out;
}

Array infer_logits(const ModelSpec& spec, const ModelState& state, const Array& input) {
  Tape tape;
  Rng rng(0);
  ForwardPass fp = forward(tape, spec, state, input, Mode::Infer, rng);
  return tape.value(fp.logits);
}

}  // namespace tsact
