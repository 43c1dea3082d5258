#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ggl/defense.hpp"

using namespace ggl;

namespace {

GradientVector single(Tensor t) {
  GradientVector g;
  g.entries.push_back({"fc1", "weight", std::move(t)});
  return g;
}

GradientVector random_grads(RandomSource& rng) {
  const Network net = presets::cnn_small({1, 6, 6}, 5, rng.next_u64());
  return param_gradients(net, uniform_sample(rng, {1, 6, 6}, 0, 1), rng.uniform_index(5));
}

// Dense(d -> d) with identity weight and zero bias, ReLU, random classifier.
Network identity_extractor(std::size_t d, std::size_t classes) {
  Network base = Network::initialized({d}, {LayerSpec::dense(d, d), LayerSpec::relu(), LayerSpec::dense(d, classes)},
                                      classes, 7);
  auto params = base.params();
  for (std::size_t i = 0; i < d * d; ++i) params[0].value[i] = i % (d + 1) == 0 ? 1.0 : 0.0;
  for (double& v : params[1].value.values()) v = 0.0;
  return Network({d}, base.layers(), classes, std::move(params));
}

}  // namespace

TEST(Clip, Examples) {
  const auto y = clip(single(Tensor::vector({3, 4})), 4.0);
  EXPECT_DOUBLE_EQ(y.entries[0].value[0], 2.4);
  EXPECT_DOUBLE_EQ(y.entries[0].value[1], 3.2);
  EXPECT_NEAR(l2_norm(y.entries[0].value), 4.0, 1e-15);
  const auto below = single(Tensor::vector({0, 3}));
  EXPECT_EQ(clip(below, 4.0), below);
  const auto zero = single(Tensor({5}));
  EXPECT_EQ(clip(zero, 4.0), zero);
  EXPECT_THROW(clip(zero, 0.0), Error);
}

TEST(Clip, PostconditionIdempotenceAndDirection) {
  RandomSource rng(1);
  for (int t = 0; t < 30; ++t) {
    const GradientVector g = random_grads(rng);
    const double s = rng.uniform(0.001, 0.5);
    const GradientVector y = clip(g, s);
    EXPECT_EQ(clip(y, s), y);
    for (std::size_t i = 0; i < g.entries.size(); ++i) {
      const double n0 = l2_norm(g.entries[i].value);
      EXPECT_NEAR(l2_norm(y.entries[i].value), std::min(s, n0), 1e-12);
      if (n0 > 0) {
        const double cosine = dot(g.entries[i].value, y.entries[i].value) / (n0 * l2_norm(y.entries[i].value));
        EXPECT_NEAR(cosine, 1.0, 1e-12);
      }
    }
  }
}

TEST(Clip, LayerFilter) {
  RandomSource rng(2);
  const GradientVector g = random_grads(rng);
  const GradientVector y = clip(g, 1e-6, {"fc1"});
  for (std::size_t i = 0; i < g.entries.size(); ++i) {
    if (g.entries[i].layer == "fc1") EXPECT_NE(y.entries[i], g.entries[i]);
    else EXPECT_EQ(y.entries[i], g.entries[i]);
  }
}

TEST(Noise, ZeroSigmaIsIdentityAndSeeded) {
  RandomSource rng(3);
  const GradientVector g = random_grads(rng);
  RandomSource a(5), b(5);
  EXPECT_EQ(add_noise(g, 0.0, a), g);
  RandomSource c(9), d(9);
  EXPECT_EQ(add_noise(g, 0.1, c), add_noise(g, 0.1, d));
  RandomSource e(1);
  EXPECT_THROW(add_noise(g, -0.1, e), Error);
}

TEST(Noise, EmpiricalStandardDeviation) {
  const GradientVector g = single(Tensor({1000000}, 0.25));
  RandomSource rng(77);
  const GradientVector y = add_noise(g, 0.1, rng);
  double m = 0.0, v = 0.0;
  for (std::size_t i = 0; i < 1000000; ++i) m += y.entries[0].value[i] - 0.25;
  m /= 1e6;
  for (std::size_t i = 0; i < 1000000; ++i) {
    const double d = y.entries[0].value[i] - 0.25 - m;
    v += d * d;
  }
  EXPECT_NEAR(std::sqrt(v / (1e6 - 1)), 0.1, 0.001);
}

TEST(Sparsify, QuantileRuleExamples) {
  EXPECT_EQ(sparsify_tensor(Tensor::vector({1, -2, 3, 0.5}), 0.5), Tensor::vector({0, -2, 3, 0}));
  EXPECT_EQ(sparsify_tensor(Tensor::vector({2, -2, 2, 2}), 0.3), Tensor({4}));
  EXPECT_EQ(sparsify_rank(0.9, 64), 58u);
  EXPECT_EQ(sparsify_rank(0.7, 10), 7u);
  EXPECT_EQ(sparsify_rank(0.9, 1000), 900u);
  EXPECT_EQ(sparsify_rank(0.01, 5), 1u);
}

TEST(Sparsify, NinetyPercentOfThousandDistinct) {
  RandomSource rng(4);
  std::vector<double> v(1000);
  std::iota(v.begin(), v.end(), 1.0);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_index(i)]);
  for (std::size_t i = 0; i < v.size(); i += 3) v[i] = -v[i];
  const Tensor out = sparsify_tensor(Tensor::vector(v), 0.9);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (out[i] == 0.0) ++zeros;
    else EXPECT_GT(std::abs(v[i]), 900.0);
  }
  EXPECT_EQ(zeros, 900u);
}

TEST(Sparsify, SupportAndZeroFractionProperty) {
  RandomSource rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.uniform_index(400);
    const double p = rng.uniform(0.01, 0.99);
    Tensor in = gaussian_sample(rng, {n}, 0, 1);
    for (std::size_t i = 0; i < n; ++i)
      if (rng.uniform() < 0.2) in[i] = 0.0;  // some exact zeros and ties
    const Tensor out = sparsify_tensor(in, p);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i] == 0.0) EXPECT_EQ(out[i], 0.0);
      EXPECT_TRUE(out[i] == 0.0 || out[i] == in[i]);
      zeros += out[i] == 0.0;
    }
    EXPECT_GE(static_cast<double>(zeros), p * static_cast<double>(n));
  }
}

TEST(Sparsify, RateValidated) {
  const auto g = single(Tensor::vector({1, 2}));
  EXPECT_THROW(sparsify(g, 0.0), Error);
  EXPECT_THROW(sparsify(g, 1.0), Error);
}

TEST(Soteria, IdentityExtractorPrunesLargestInputs) {
  const Network net = identity_extractor(10, 3);
  const Tensor x = Tensor::vector({0.1, 0.9, 0.3, 0.75, 0.2, 0.6, 0.05, 0.8, 0.4, 0.5});
  const SoteriaMask m = soteria_mask(net, x, 0.3);
  EXPECT_EQ(m.layer, "fc2");
  EXPECT_EQ(m.pruned, (std::vector<std::size_t>{1, 7, 3}));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(m.scores[i], x[i], 1e-9);
  const SoteriaMask m8 = soteria_mask(net, x, 0.8);
  EXPECT_EQ(m8.pruned.size(), 8u);
}

TEST(Soteria, ZeroScoreEntriesPrunedLast) {
  const Network net = identity_extractor(6, 2);
  // Entries 0 and 4 are dead (r = 0, zero Jacobian row).
  const Tensor x = Tensor::vector({-0.5, 0.2, 0.3, 0.1, -0.2, 0.4});
  const SoteriaMask m = soteria_mask(net, x, 0.67);
  ASSERT_EQ(m.pruned.size(), 4u);
  std::set<std::size_t> p(m.pruned.begin(), m.pruned.end());
  EXPECT_EQ(p, (std::set<std::size_t>{1, 2, 3, 5}));
  EXPECT_EQ(m.scores[0], 0.0);
}

TEST(Soteria, LocalityAndMaskedColumns) {
  RandomSource rng(6);
  for (int t = 0; t < 20; ++t) {
    const Network net = presets::mlp_small({1, 5, 5}, 4, rng.next_u64());
    const Tensor x = uniform_sample(rng, {1, 5, 5}, 0, 1);
    DefenseConfig cfg;
    cfg.steps = {Soteria{0.8, ""}};
    const GradientVector base = param_gradients(net, x, 1);
    const GradientVector y = apply_defense(net, x, 1, cfg);
    const SoteriaMask m = soteria_mask(net, x, 0.8);
    EXPECT_EQ(m.pruned.size(), 51u);  // floor(0.8 * 64)
    EXPECT_EQ(y.entries[0], base.entries[0]);
    EXPECT_EQ(y.entries[1], base.entries[1]);
    EXPECT_EQ(y.entries[3], base.entries[3]);  // bias of the defended layer
    for (std::size_t j : m.pruned)
      for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(y.entries[2].value[o * 64 + j], 0.0);
  }
}

TEST(Soteria, LayerValidation) {
  const Network net = presets::cnn_small({1, 6, 6}, 3, 1);
  EXPECT_THROW(soteria_mask(net, Tensor({1, 6, 6}, 0.5), 0.5, "conv1"), Error);
  EXPECT_THROW(soteria_mask(net, Tensor({1, 6, 6}, 0.5), 0.5, "fc9"), Error);
  EXPECT_THROW(soteria_mask(net, Tensor({1, 6, 6}, 0.5), 1.0), Error);
}

TEST(ApplyDefense, EmptyConfigIsForwardOperator) {
  const Network net = presets::mlp_small({1, 4, 4}, 3, 2);
  const Tensor x({1, 4, 4}, 0.4);
  EXPECT_EQ(apply_defense(net, x, 2, DefenseConfig{}), param_gradients(net, x, 2));
}

TEST(ApplyDefense, ClipThenNoiseAndOrderMatters) {
  RandomSource rng(7);
  const Network net = presets::cnn_small({1, 6, 6}, 4, 3);
  const Tensor x = uniform_sample(rng, {1, 6, 6}, 0, 1);
  DefenseConfig both;
  both.steps = {Clip{0.05, {}}, Noise{0.1, {}}};
  both.seed = 3;
  DefenseConfig clip_only;
  clip_only.steps = {Clip{0.05, {}}};
  for (const auto& e : apply_defense(net, x, 0, clip_only).entries) EXPECT_LE(l2_norm(e.value), 0.05 * (1 + 1e-12));
  RandomSource r(3);
  const GradientVector manual = add_noise(clip(param_gradients(net, x, 0), 0.05), 0.1, r);
  EXPECT_EQ(apply_defense(net, x, 0, both), manual);
  DefenseConfig reversed = both;
  reversed.steps = {Noise{0.1, {}}, Clip{0.05, {}}};
  EXPECT_NE(apply_defense(net, x, 0, reversed), apply_defense(net, x, 0, both));
}

TEST(ApplyDefense, SparsifyPostcondition) {
  const Network net = presets::mlp_small({1, 6, 6}, 5, 4);
  DefenseConfig cfg;
  cfg.steps = {Sparsify{0.9, {}}};
  for (const auto& e : apply_defense(net, Tensor({1, 6, 6}, 0.7), 3, cfg).entries) {
    std::size_t zeros = 0;
    for (double v : e.value.data()) zeros += v == 0.0;
    EXPECT_GE(static_cast<double>(zeros), 0.9 * static_cast<double>(e.value.size()));
  }
}

TEST(DefenseConfig, Validation) {
  DefenseConfig c;
  c.steps = {Noise{-1.0, {}}};
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "defense.noise.sigma must be ≥ 0");
  }
  c.steps = {Soteria{0.5, ""}, Soteria{0.5, ""}};
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "at most one soteria step");
  }
  c.steps = {Clip{1.0, {}}, Soteria{0.5, ""}};
  EXPECT_THROW(c.validate(), Error);
  c.steps = {Soteria{0.5, ""}, Clip{1.0, {}}, Noise{0.0, {}}, Sparsify{0.5, {}}};
  EXPECT_NO_THROW(c.validate());
}
