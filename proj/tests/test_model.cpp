#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tsact/error.hpp"
#include "tsact/model.hpp"

namespace tsact {
namespace {

std::size_t mlp_count_oracle(std::size_t L, std::size_t C) {
  const std::size_t H = C > 2 ? C : 1;
  return 500 * L + 500 + 500 * 500 + 500 + 500 * H + H;
}

Array random_input(std::size_t b, std::size_t l, std::uint64_t seed) {
  Rng rng(seed);
  Array x({b, l});
  for (double& v : x.data()) v = rng.normal();
  return x;
}

std::vector<int> random_labels(std::size_t b, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(b);
  for (int& v : y) v = static_cast<int>(rng.below(c));
  return y;
}

TEST(Mlp, ParameterCount) {
  EXPECT_EQ(parameter_count(build_mlp(24, 2, Activation::LeakySineLU)), 263501u);
  for (std::size_t L : {1, 24, 150})
    for (std::size_t C : {2, 3, 7})
      EXPECT_EQ(parameter_count(build_mlp(L, C, Activation::ReLU)), mlp_count_oracle(L, C));
  // PReLU adds one alpha per hidden neuron
  EXPECT_EQ(parameter_count(build_mlp(24, 2, ActivationKind::prelu())), 263501u + 1000u);
  const ModelSpec s = build_mlp(24, 2, Activation::LeakySineLU);
  EXPECT_EQ(init_params(s, 0).scalar_count(), parameter_count(s));
}

TEST(Mlp, Layout) {
  const ModelSpec s = build_mlp(24, 3, Activation::ReLU);
  EXPECT_EQ(s.head, Head::Softmax);
  std::vector<std::size_t> widths;
  std::vector<double> drops;
  for (const auto& l : s.layers) {
    if (l.type == LayerType::Dense) widths.push_back(l.units);
    if (l.type == LayerType::Dropout) drops.push_back(l.p);
  }
  EXPECT_EQ(widths, (std::vector<std::size_t>{500, 500, 3}));
  EXPECT_EQ(drops, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(build_mlp(24, 2, Activation::ReLU).head, Head::Sigmoid);
  EXPECT_EQ(build_mlp(24, 2, Activation::ReLU).head_units(), 1u);
}

TEST(Model, InvalidSizes) {
  EXPECT_THROW(build_mlp(0, 2, Activation::ReLU), ConfigError);
  EXPECT_THROW(build_mlp(10, 1, Activation::ReLU), ConfigError);
  EXPECT_THROW(build_fcn(10, 0, Activation::ReLU), ConfigError);
}

TEST(Fcn, Layout) {
  const ModelSpec s = build_fcn(96, 5, Activation::Snake);
  std::vector<std::size_t> channels, kernels;
  std::size_t bn = 0;
  for (const auto& l : s.layers) {
    if (l.type == LayerType::Conv) {
      channels.push_back(l.units);
      kernels.push_back(l.kernel);
    }
    if (l.type == LayerType::BatchNorm) ++bn;
  }
  EXPECT_EQ(channels, (std::vector<std::size_t>{128, 256, 128}));
  EXPECT_EQ(kernels, (std::vector<std::size_t>{8, 5, 3}));
  EXPECT_EQ(bn, 3u);
  EXPECT_EQ(s.head, Head::Softmax);
  for (const auto& l : build_fcn(96, 5, Activation::Snake, false).layers) EXPECT_NE(l.type, LayerType::BatchNorm);
}

TEST(Fcn, ShapeTrace) {
  const ModelSpec s = build_fcn(96, 5, Activation::Snake);
  const ModelState st = init_params(s, 1);
  Tape t;
  Rng rng(0);
  ForwardPass fp = forward(t, s, st, random_input(4, 96, 3).reshaped({4, 1, 96}), Mode::Train, rng);
  std::vector<Shape> trace;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& op = t.node(i).op;
    if (op == "conv1d_same" || op == "global_avg_pool" || op == "affine") trace.push_back(t.node(i).value.shape());
  }
  EXPECT_EQ(trace, (std::vector<Shape>{{4, 128, 96}, {4, 256, 96}, {4, 128, 96}, {4, 128}, {4, 5}}));
  EXPECT_EQ(t.value(fp.logits).shape(), (Shape{4, 5}));
}

TEST(Model, OutputShapesForAnyBatch) {
  for (Architecture arch : {Architecture::MLP, Architecture::FCN}) {
    const ModelSpec s = build_model(arch, 17, 4, Activation::LeakySineLU);
    const ModelState st = init_params(s, 2);
    for (std::size_t b : {1, 3, 9}) {
      EXPECT_EQ(infer_logits(s, st, random_input(b, 17, b)).shape(), (Shape{b, 4}));
    }
  }
}

TEST(Init, DeterministicAndScaled) {
  const ModelSpec s = build_mlp(24, 2, Activation::ReLU);
  const ModelState a = init_params(s, 42), b = init_params(s, 42), c = init_params(s, 43);
  EXPECT_EQ(a.params, b.params);
  EXPECT_NE(a.params, c.params);
  const Array& w = a.param("dense1.weight");  // fan_in 500
  double mean = 0, sq = 0;
  for (double v : w.values()) mean += v;
  mean /= static_cast<double>(w.size());
  for (double v : w.values()) sq += (v - mean) * (v - mean);
  const double var = sq / static_cast<double>(w.size());
  EXPECT_NEAR(var, 2.0 / 500.0, 0.2 * 2.0 / 500.0);
  for (std::size_t i = 0; i < a.names.size(); ++i) {
    if (a.names[i].ends_with(".bias")) {
      for (double v : a.params[i].values()) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(Init, ActivationParameters) {
  const ModelState p = init_params(build_fcn(20, 3, ActivationKind::prelu()), 0);
  EXPECT_EQ(p.param("act0.alpha").shape(), (Shape{128}));
  for (double v : p.param("act1.alpha").values()) EXPECT_EQ(v, 0.25);
  const ModelState s = init_params(build_fcn(20, 3, ActivationKind::snake(1.0, true)), 0);
  for (double v : s.param("act2.a").values()) EXPECT_EQ(v, 1.0);
}

TEST(Spec, JsonRoundTrip) {
  for (const ModelSpec& s : {build_mlp(24, 2, ActivationKind::elu(0.7)), build_fcn(50, 6, ActivationKind::prelu(0.3), false),
                             build_fcn(50, 6, ActivationKind::snake(2.0, true))}) {
    ModelSpec with_seed = s;
    with_seed.seed = 99;
    EXPECT_EQ(model_spec_from_json(nlohmann::json::parse(to_json(with_seed).dump())), with_seed);
  }
}

TEST(Predict, HeadsAndTies) {
  const ModelSpec bin = build_mlp(4, 2, Activation::ReLU);
  EXPECT_EQ(predict_classes(bin, Array::matrix({{0.1}, {-0.1}, {0.0}})), (std::vector<int>{1, 0, 0}));
  const ModelSpec multi = build_mlp(4, 3, Activation::ReLU);
  EXPECT_EQ(predict_classes(multi, Array::matrix({{1, 3, 2}, {5, 5, 1}})), (std::vector<int>{1, 0}));
}

TEST(Predict, InferenceIgnoresDropout) {
  const ModelSpec s = build_mlp(12, 3, Activation::LeakySineLU);
  const ModelState st = init_params(s, 0);
  const Array x = random_input(5, 12, 9);
  EXPECT_EQ(infer_logits(s, st, x), infer_logits(s, st, x));
}

// Whole-model gradient checks on small inputs; the full matrix over every
// activation runs in the acceptance binary.
TEST(GradCheck, MlpLeakySineLU) {
  const ModelSpec s = build_mlp(6, 3, Activation::LeakySineLU);
  const auto rep = oracle::model_grad_check(s, init_params(s, 1), random_input(4, 6, 2), random_labels(4, 3, 3), 7);
  EXPECT_GT(rep.checked, 10u);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(GradCheck, FcnPReLUWithoutNorm) {
  const ModelSpec s = build_fcn(10, 2, ActivationKind::prelu(), false);
  const auto rep = oracle::model_grad_check(s, init_params(s, 4), random_input(3, 10, 5), random_labels(3, 2, 6), 8);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

TEST(GradCheck, FcnGeLUWithNorm) {
  const ModelSpec s = build_fcn(8, 4, Activation::GeLU, true);
  const auto rep = oracle::model_grad_check(s, init_params(s, 4), random_input(3, 8, 5), random_labels(3, 4, 6), 8);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}

}  // namespace
}  // namespace tsact
