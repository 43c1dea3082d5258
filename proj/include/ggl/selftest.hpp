#pragma once

// Quick built-in checks behind the `selftest` subcommand: finite-difference
// agreement of the analytic gradients plus a handful of defense, label and
// format properties. The full suites live in the test tree.

#include <string>
#include <vector>

#include "ggl/adversary.hpp"
#include "ggl/client.hpp"
#include "ggl/image_io.hpp"
#include "ggl/verify/reference.hpp"

namespace ggl {

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Network sigmoid_net(std::uint64_t seed) {
  return Network::initialized({2, 5, 5},
                              {LayerSpec::conv2d(2, 3, 3, 3, 2, 1), LayerSpec::sigmoid(),
                               LayerSpec::flatten(), LayerSpec::dense(27, 6), LayerSpec::relu(),
                               LayerSpec::dense(6, 4)},
                              4, seed);
}

inline std::pair<std::size_t, double> gradient_mismatches(const Network& net, const Tensor& x,
                                                          std::size_t c) {
  const GradientVector a = param_gradients(net, x, c);
  const GradientVector n = verify::fd_param_gradients(net, x, c);
  std::size_t bad = 0;
  double worst = 0.0;
  for (std::size_t t = 0; t < a.entries.size(); ++t)
    for (std::size_t i = 0; i < a.entries[t].value.size(); ++i) {
      const double u = a.entries[t].value[i], v = n.entries[t].value[i];
      if (!verify::close(u, v, 1e-5, 1e-8)) ++bad;
      worst = std::max(worst, std::abs(u - v));
    }
  const Tensor ja = representation_input_jacobian(net, x);
  const Tensor jn = verify::fd_layer_jacobian(net, x, net.final_dense_index());
  for (std::size_t i = 0; i < ja.size(); ++i) {
    if (!verify::close(ja[i], jn[i], 1e-5, 1e-8)) ++bad;
    worst = std::max(worst, std::abs(ja[i] - jn[i]));
  }
  return {bad, worst};
}

}  // namespace detail

inline std::vector<SelfCheck> run_selftest(std::uint64_t seed) {
  std::vector<SelfCheck> checks;
  RandomSource rng(seed);

  {
    std::size_t bad = 0, instances = 0;
    double worst = 0.0;
    for (std::size_t trial = 0; instances < 6 && trial < 50; ++trial) {
      const std::uint64_t s = rng.next_u64();
      Network net = trial % 3 == 0   ? presets::mlp_small({1, 6, 6}, 5, s)
                    : trial % 3 == 1 ? presets::cnn_small({1, 6, 6}, 5, s)
                                     : detail::sigmoid_net(s);
      const Tensor x = uniform_sample(rng, net.input_shape(), 0.0, 1.0);
      if (verify::kink_margin(net, x) < 1e-3) continue;
      const auto [b, w] = detail::gradient_mismatches(net, x, rng.uniform_index(net.class_count()));
      bad += b;
      worst = std::max(worst, w);
      ++instances;
    }
    checks.push_back({"finite_difference_gradients", bad == 0 && instances == 6,
                      std::to_string(instances) + " instances, " + std::to_string(bad) +
                          " mismatches, max abs diff " + std::to_string(worst)});
  }

  {
    std::size_t correct = 0;
    const std::size_t n = 100;
    for (std::size_t i = 0; i < n; ++i) {
      const Network net = presets::mlp_small({1, 6, 6}, 10, rng.next_u64());
      const Tensor x = uniform_sample(rng, net.input_shape(), 0.0, 1.0);
      const std::size_t c = rng.uniform_index(10);
      try {
        if (infer_label(param_gradients(net, x, c)) == c) ++correct;
      } catch (const Error&) {
      }
    }
    checks.push_back({"label_inference", correct == n,
                      std::to_string(correct) + "/" + std::to_string(n) + " correct"});
  }

  {
    const Network net = presets::cnn_small({1, 6, 6}, 5, rng.next_u64());
    const Tensor x = uniform_sample(rng, net.input_shape(), 0.0, 1.0);
    const GradientVector g = param_gradients(net, x, 1);
    const GradientVector c1 = clip(g, 0.05);
    bool ok = clip(c1, 0.05) == c1;
    for (std::size_t t = 0; t < g.entries.size(); ++t)
      ok = ok && std::abs(l2_norm(c1.entries[t].value) -
                          std::min(0.05, l2_norm(g.entries[t].value))) <= 1e-12;
    const GradientVector s = sparsify(g, 0.9);
    for (const auto& e : s.entries) {
      std::size_t zeros = 0;
      for (double v : e.value.data()) zeros += v == 0.0;
      ok = ok && static_cast<double>(zeros) >= 0.9 * static_cast<double>(e.value.size());
    }
    checks.push_back({"defense_invariants", ok, "clip norm/idempotence, sparsify zero fraction"});
  }

  {
    const Network net = presets::mlp_small({1, 4, 4}, 3, rng.next_u64());
    const Tensor x = uniform_sample(rng, net.input_shape(), 0.0, 1.0);
    DefenseConfig cfg;
    cfg.steps = {Noise{0.01, {}}};
    cfg.seed = rng.next_u64();
    const SharedGradients share = produce_share(net, x, 2, cfg);
    const Bytes bytes = encode_share(share);
    bool ok = decode_share(bytes) == share && encode_share(decode_share(bytes)) == bytes;
    ok = ok && decode_network(encode_network(net)) == net;
    Tensor img({1, 4, 4});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * 17 % 256) / 255.0;
    ok = ok && decode_image(encode_image(img)) == img;
    Bytes broken = bytes;
    broken[broken.size() / 2] ^= 0x1;
    try {
      decode_share(broken);
      ok = false;
    } catch (const Error& e) {
      ok = ok && e.code() == ErrorCode::checksum_mismatch;
    }
    checks.push_back({"format_round_trips", ok, "GGLG, GGLW, PGM, checksum detection"});
  }
  return checks;
}

}  // namespace ggl
