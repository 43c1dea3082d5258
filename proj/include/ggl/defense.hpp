#pragma once

// Client-side gradient degradation: y = T(F(x)) + noise.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ggl/error.hpp"
#include "ggl/nn.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

// Per-tensor clipping: t / max(1, |t| / bound).
struct Clip {
  double bound = 1.0;
  std::vector<std::string> layers;  // empty: every layer
};

struct Noise {
  double sigma = 0.0;
  std::vector<std::string> layers;
};

struct Sparsify {
  double rate = 0.5;
  std::vector<std::string> layers;
};

// Representation pruning on a Dense layer (by default the final one).
struct Soteria {
  double rate = 0.5;
  std::string layer;  // empty: final Dense layer
};

using DefenseStep = std::variant<Clip, Noise, Sparsify, Soteria>;

struct DefenseConfig {
  std::vector<DefenseStep> steps;
  std::uint64_t seed = 0;

  void validate() const {
    const auto soteria = std::count_if(steps.begin(), steps.end(), [](const DefenseStep& s) {
      return std::holds_alternative<Soteria>(s);
    });
    require(soteria <= 1, ErrorCode::invalid_argument, "at most one soteria step");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      std::visit(
          [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Clip>) {
              require(std::isfinite(s.bound) && s.bound > 0.0, ErrorCode::invalid_argument,
                      "defense.clip.bound must be > 0");
            } else if constexpr (std::is_same_v<T, Noise>) {
              require(std::isfinite(s.sigma) && s.sigma >= 0.0, ErrorCode::invalid_argument,
                      "defense.noise.sigma must be ≥ 0");
            } else if constexpr (std::is_same_v<T, Sparsify>) {
              require(s.rate > 0.0 && s.rate < 1.0, ErrorCode::invalid_argument,
                      "defense.sparsify.p must be in (0, 1)");
            } else {
              require(s.rate > 0.0 && s.rate < 1.0, ErrorCode::invalid_argument,
                      "defense.soteria.p must be in (0, 1)");
              require(i == 0, ErrorCode::invalid_argument, "soteria must be the first step");
            }
          },
          steps[i]);
    }
  }
};

namespace detail {

inline bool selected(const std::vector<std::string>& layers, const std::string& name) {
  return layers.empty() || std::find(layers.begin(), layers.end(), name) != layers.end();
}

inline double norm_or_zero(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace detail

inline constexpr double kClipSlack = 1e-12;

inline GradientVector clip(GradientVector y, double bound,
                           const std::vector<std::string>& layers = {}) {
  require(std::isfinite(bound) && bound > 0.0, ErrorCode::invalid_argument,
          "clipping bound must be positive");
  for (auto& e : y.entries) {
    if (!detail::selected(layers, e.layer)) continue;
    // Norms within rounding of the bound are left alone so that clip(clip(y))
    // is bit-identical to clip(y).
    const double norm = detail::norm_or_zero(e.value);
    if (norm <= bound * (1.0 + kClipSlack)) continue;
    const double scale = norm / bound;
    for (double& v : e.value.values()) v /= scale;
  }
  return y;
}

inline GradientVector add_noise(GradientVector y, double sigma, RandomSource& rng,
                                const std::vector<std::string>& layers = {}) {
  require(std::isfinite(sigma) && sigma >= 0.0, ErrorCode::invalid_argument,
          "noise sigma must be non-negative");
  if (sigma == 0.0) return y;
  for (auto& e : y.entries) {
    if (!detail::selected(layers, e.layer)) continue;
    for (double& v : e.value.values()) v += sigma * rng.normal();
  }
  return y;
}

// Number of entries a rate-p sparsification removes: ceil(p * n), with p * n
// values within rounding of an integer (0.7 * 10) taken as that integer.
inline std::size_t sparsify_rank(double rate, std::size_t n) {
  const double target = rate * static_cast<double>(n);
  const double nearest = std::round(target);
  if (std::abs(target - nearest) <= 1e-9 * std::max(1.0, target))
    return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(target));
}

// Zeroes every entry whose magnitude is not strictly above the k-th smallest
// magnitude of its tensor, k = sparsify_rank(p, n).
inline Tensor sparsify_tensor(const Tensor& t, double rate) {
  const std::size_t n = t.size();
  const std::size_t rank = std::min(sparsify_rank(rate, n), n);
  if (rank == 0) return t;
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(t[i]);
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank - 1), mags.end());
  const double tau = mags[rank - 1];
  Tensor out = t;
  for (double& v : out.values())
    if (!(std::abs(v) > tau)) v = 0.0;
  return out;
}

inline GradientVector sparsify(GradientVector y, double rate,
                               const std::vector<std::string>& layers = {}) {
  require(rate > 0.0 && rate < 1.0, ErrorCode::invalid_argument, "sparsity rate must be in (0, 1)");
  for (auto& e : y.entries)
    if (detail::selected(layers, e.layer)) e.value = sparsify_tensor(e.value, rate);
  return y;
}

struct SoteriaMask {
  std::string layer;            // defended Dense layer
  std::vector<std::size_t> pruned;  // representation indices, by decreasing score
  std::vector<double> scores;   // one per representation entry
  Tensor weight_mask;           // {0,1}, shape of the defended weight
};

inline constexpr double kSoteriaDelta = 1e-12;

inline std::size_t resolve_dense_layer(const Network& net, const std::string& layer) {
  if (layer.empty()) return net.final_dense_index();
  const auto idx = net.layer_index(layer);
  require(idx.has_value(), ErrorCode::invalid_argument, "defended layer '" + layer + "' not found");
  require(net.layers()[*idx].kind == LayerKind::dense, ErrorCode::invalid_argument,
          "defended layer '" + layer + "' is not Dense");
  return *idx;
}

// score_i = |r_i| / (|d r_i / dx|_2 + delta); the floor(p*l) highest scores are
// pruned, which zeroes the matching weight-gradient columns of the layer.
inline SoteriaMask soteria_mask(const Network& net, const Tensor& x, double rate,
                                const std::string& layer = {}) {
  require(rate > 0.0 && rate < 1.0, ErrorCode::invalid_argument, "pruning rate must be in (0, 1)");
  const std::size_t idx = resolve_dense_layer(net, layer);
  const ForwardCache cache = forward_cache(net, x.data(), idx);
  const std::vector<double>& r = cache.acts.back();
  const Tensor jac = layer_input_jacobian(net, x, idx);
  const std::size_t l = r.size();
  const std::size_t d = net.input_size();
  SoteriaMask mask;
  mask.layer = net.layer_name(idx);
  mask.scores.resize(l);
  for (std::size_t i = 0; i < l; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += jac[i * d + j] * jac[i * d + j];
    mask.scores[i] = std::abs(r[i]) / (std::sqrt(s) + kSoteriaDelta);
  }
  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mask.scores[a] > mask.scores[b];
  });
  const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(l)));
  mask.pruned.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  const std::size_t out = net.layers()[idx].out;
  mask.weight_mask = Tensor({out, l}, 1.0);
  for (std::size_t j : mask.pruned)
    for (std::size_t o = 0; o < out; ++o) mask.weight_mask[o * l + j] = 0.0;
  return mask;
}

inline GradientVector apply_soteria(GradientVector y, const SoteriaMask& mask) {
  const auto slot = y.index_of(mask.layer, "weight");
  require(slot.has_value(), ErrorCode::invalid_argument,
          "defended layer '" + mask.layer + "' has no weight gradient");
  Tensor& w = y.entries[*slot].value;
  require(w.shape() == mask.weight_mask.shape(), ErrorCode::shape_mismatch,
          "shape mismatch: soteria mask does not fit " + mask.layer + ".weight");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] *= mask.weight_mask[i];
  return y;
}

inline GradientVector apply_defense(const Network& net, const Tensor& x, std::size_t label,
                                    const DefenseConfig& cfg, RandomSource& rng) {
  cfg.validate();
  GradientVector y = param_gradients(net, x, label);
  for (const auto& step : cfg.steps) {
    if (const auto* s = std::get_if<Soteria>(&step)) {
      y = apply_soteria(std::move(y), soteria_mask(net, x, s->rate, s->layer));
    } else if (const auto* c = std::get_if<Clip>(&step)) {
      y = clip(std::move(y), c->bound, c->layers);
    } else if (const auto* n = std::get_if<Noise>(&step)) {
      y = add_noise(std::move(y), n->sigma, rng, n->layers);
    } else if (const auto* p = std::get_if<Sparsify>(&step)) {
      y = sparsify(std::move(y), p->rate, p->layers);
    }
  }
  return y;
}

inline GradientVector apply_defense(const Network& net, const Tensor& x, std::size_t label,
                                    const DefenseConfig& cfg) {
  RandomSource rng(cfg.seed);
  return apply_defense(net, x, label, cfg, rng);
}

}  // namespace ggl
