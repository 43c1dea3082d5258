#pragma once

// Gradient-leakage attacker working in a generator's latent space.
//
//   z* = argmin_z  D(y, T^(F(G(z)))) + lambda * R(z)
//
// y is the observed share, F the FL model's parameter gradient, G the
// generator and T^ the defense transformation estimated from y itself.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ggl/client.hpp"
#include "ggl/defense.hpp"
#include "ggl/generator.hpp"
#include "ggl/nn.hpp"
#include "ggl/optim/cmaes.hpp"
#include "ggl/optim/fd_adam.hpp"
#include "ggl/optim/turbo.hpp"

namespace ggl {

enum class LossKind { l2, cosine };           // D1, D2
enum class RegularizerKind { kl, norm };      // R1, R2
enum class EstimationMode { automatic, on, off };

struct EstimationConfig {
  EstimationMode clip = EstimationMode::automatic;
  EstimationMode sparsify = EstimationMode::automatic;
  EstimationMode soteria = EstimationMode::automatic;
};

using OptimizerConfig = std::variant<optim::CmaesConfig, optim::TurboConfig, optim::AdamConfig>;

struct AttackConfig {
  LossKind loss = LossKind::l2;
  RegularizerKind regularizer = RegularizerKind::kl;
  double lambda = 0.1;
  double bound = 2.0;
  OptimizerConfig optimizer = optim::CmaesConfig{};
  EstimationConfig estimation;

  void validate() const {
    require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
            "attack.lambda must be ≥ 0");
    require(std::isfinite(bound) && bound > 0.0, ErrorCode::invalid_argument,
            "attack.bound must be > 0");
  }
};

// --- distances and regularizers -------------------------------------------

inline double loss_l2(std::span<const double> y, std::span<const double> y_tilde) {
  require(y.size() == y_tilde.size(), ErrorCode::shape_mismatch,
          "shape mismatch: gradient vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = y[i] - y_tilde[i];
    s += diff * diff;
  }
  return s;
}

inline double loss_cosine(std::span<const double> y, std::span<const double> y_tilde) {
  require(y.size() == y_tilde.size(), ErrorCode::shape_mismatch,
          "shape mismatch: gradient vectors differ in length");
  double yy = 0.0, tt = 0.0, yt = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    yy += y[i] * y[i];
    tt += y_tilde[i] * y_tilde[i];
    yt += y[i] * y_tilde[i];
  }
  require(yy > 0.0 && tt > 0.0, ErrorCode::undefined_cosine, "undefined cosine");
  return 1.0 - yt / (std::sqrt(yy) * std::sqrt(tt));
}

inline double loss_l2(const GradientVector& y, const GradientVector& y_tilde) {
  require(y.same_layout(y_tilde), ErrorCode::shape_mismatch, "shape mismatch: gradient layouts differ");
  return loss_l2(y.flatten_concat(), y_tilde.flatten_concat());
}

inline double loss_cosine(const GradientVector& y, const GradientVector& y_tilde) {
  require(y.same_layout(y_tilde), ErrorCode::shape_mismatch, "shape mismatch: gradient layouts differ");
  return loss_cosine(y.flatten_concat(), y_tilde.flatten_concat());
}

// KL of N(mu, sigma^2) to N(0, 1) with mu, sigma the population moments of
// the latent's components: -(k/2)(1 + log sigma^2 - mu^2 - sigma^2).
inline double reg_kl(std::span<const double> z) {
  require(z.size() >= 2, ErrorCode::invalid_argument, "KL regularizer needs k >= 2");
  const auto k = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= k;
  require(var > 0.0, ErrorCode::degenerate_latent, "degenerate latent");
  return -0.5 * k * (1.0 + std::log(var) - mean * mean - var);
}

inline double reg_norm(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  const double diff = s - static_cast<double>(z.size());
  return diff * diff;
}

inline double regularizer(RegularizerKind kind, std::span<const double> z) {
  return kind == RegularizerKind::kl ? reg_kl(z) : reg_norm(z);
}

// --- label inference --------------------------------------------------------

// Final classification layer weight gradient: the last 2-D "weight" entry.
inline std::size_t final_fc_slot(const GradientVector& g) {
  for (std::size_t i = g.entries.size(); i-- > 0;)
    if (g.entries[i].param == "weight" && g.entries[i].value.shape().size() == 2) return i;
  fail(ErrorCode::invalid_argument, "share has no Dense weight gradient");
}

// Row c of the final FC weight gradient is (p_c - 1) * r with r >= 0, every
// other row is p_i * r, so the only negative row sum identifies the label.
inline std::size_t infer_label(const GradientVector& g) {
  const Tensor& w = g.entries[final_fc_slot(g)].value;
  const std::size_t rows = w.shape()[0], cols = w.shape()[1];
  std::size_t best = 0;
  double best_sum = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += w[i * cols + j];
    if (i == 0 || s < best_sum) {
      best = i;
      best_sum = s;
    }
  }
  require(best_sum < 0.0, ErrorCode::label_not_identifiable, "label not identifiable");
  return best;
}

inline std::size_t infer_label(const SharedGradients& s) { return infer_label(s.grads); }

// --- transform estimation ---------------------------------------------------

struct EstimatedTransform {
  std::vector<double> clip_bounds;   // per tensor: observed l2 norm
  std::vector<double> sparsity;      // per tensor: fraction of exact zeros
  std::vector<Tensor> masks;         // per tensor: merged {0,1} mask
  std::vector<bool> mask_active;     // per tensor: mask is applied
  bool clip_detected = false;
  bool sparsify_detected = false;
  bool soteria_detected = false;
  bool clip_active = false;
  std::string defended_layer;
  Tensor soteria_mask;               // column mask of the defended weight
};

inline constexpr double kClipTieTolerance = 1e-6;
inline constexpr double kMaskDetectionFraction = 0.5;

inline EstimatedTransform estimate_transform(const GradientVector& y,
                                             const EstimationConfig& mode = {}) {
  EstimatedTransform est;
  const std::size_t n = y.entries.size();
  est.clip_bounds.resize(n);
  est.sparsity.resize(n);
  est.masks.reserve(n);
  est.mask_active.assign(n, false);
  std::vector<bool> sparse_tensor(n, false);
  for (std::size_t t = 0; t < n; ++t) {
    const Tensor& v = y.entries[t].value;
    double s = 0.0;
    std::size_t zeros = 0;
    Tensor mask(v.shape(), 1.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += v[i] * v[i];
      if (v[i] == 0.0) {
        ++zeros;
        mask[i] = 0.0;
      }
    }
    est.clip_bounds[t] = std::sqrt(s);
    est.sparsity[t] = static_cast<double>(zeros) / static_cast<double>(v.size());
    sparse_tensor[t] = est.sparsity[t] >= kMaskDetectionFraction;
    est.masks.push_back(std::move(mask));
  }

  // Active layer-wise clipping leaves the largest norms tied at the bound.
  if (n >= 2) {
    const double top = *std::max_element(est.clip_bounds.begin(), est.clip_bounds.end());
    std::size_t ties = 0;
    for (double b : est.clip_bounds)
      if (top > 0.0 && std::abs(b - top) <= kClipTieTolerance * top) ++ties;
    est.clip_detected = ties >= 2;
  }
  est.clip_active = mode.clip == EstimationMode::on ||
                    (mode.clip == EstimationMode::automatic && est.clip_detected);

  for (std::size_t t = 0; t < n; ++t) {
    est.sparsify_detected = est.sparsify_detected || sparse_tensor[t];
    if (mode.sparsify == EstimationMode::on ||
        (mode.sparsify == EstimationMode::automatic && sparse_tensor[t]))
      est.mask_active[t] = true;
  }
  if (mode.sparsify == EstimationMode::off)
    for (std::size_t t = 0; t < n; ++t) est.masks[t] = Tensor(y.entries[t].value.shape(), 1.0);

  // Soteria: pruned representation entries show up as all-zero columns of
  // the defended (final Dense) weight gradient.
  const std::size_t fc = final_fc_slot(y);
  const Tensor& w = y.entries[fc].value;
  const std::size_t rows = w.shape()[0], cols = w.shape()[1];
  est.defended_layer = y.entries[fc].layer;
  est.soteria_mask = Tensor(w.shape(), 1.0);
  std::size_t zero_cols = 0;
  for (std::size_t j = 0; j < cols; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < rows && !any; ++i) any = w[i * cols + j] != 0.0;
    if (!any) {
      ++zero_cols;
      for (std::size_t i = 0; i < rows; ++i) est.soteria_mask[i * cols + j] = 0.0;
    }
  }
  est.soteria_detected =
      static_cast<double>(zero_cols) >= kMaskDetectionFraction * static_cast<double>(cols);
  if (mode.soteria == EstimationMode::on ||
      (mode.soteria == EstimationMode::automatic && est.soteria_detected)) {
    for (std::size_t i = 0; i < w.size(); ++i) est.masks[fc][i] *= est.soteria_mask[i];
    est.mask_active[fc] = true;
  }
  return est;
}

inline EstimatedTransform estimate_transform(const SharedGradients& s,
                                             const EstimationConfig& mode = {}) {
  return estimate_transform(s.grads, mode);
}

// T^: masks first, then per-tensor clipping to the observed norms. Both
// client orders (mask then clip, clip then sparsify) are inverted exactly by
// this order because clipping is a per-tensor scale.
inline GradientVector apply_estimated(GradientVector g, const EstimatedTransform& est) {
  require(g.entries.size() == est.masks.size(), ErrorCode::shape_mismatch,
          "shape mismatch: estimate does not fit gradient layout");
  for (std::size_t t = 0; t < g.entries.size(); ++t) {
    Tensor& v = g.entries[t].value;
    if (est.mask_active[t])
      for (std::size_t i = 0; i < v.size(); ++i) v[i] *= est.masks[t][i];
    if (est.clip_active) {
      const double bound = est.clip_bounds[t];
      if (bound == 0.0) {
        for (double& x : v.values()) x = 0.0;
        continue;
      }
      double s = 0.0;
      for (double x : v.data()) s += x * x;
      const double scale = std::max(1.0, std::sqrt(s) / bound);
      if (scale != 1.0)
        for (double& x : v.values()) x /= scale;
    }
  }
  return g;
}

// --- objective --------------------------------------------------------------

struct ObjectiveParts {
  double matching = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

class AttackObjective {
 public:
  AttackObjective(const SharedGradients& share, const Network& net, const Generator& gen,
                  std::size_t label, EstimatedTransform est, const AttackConfig& cfg)
      : net_(net), gen_(gen), label_(label), est_(std::move(est)), cfg_(cfg),
        observed_(share.grads.flatten_concat()) {
    require(gen.output_size() == net.input_size(), ErrorCode::shape_mismatch,
            "shape mismatch: generator output " + shape_string(gen.output_shape) +
                " does not fit model input " + shape_string(net.input_shape()));
    require(share.grads.same_layout(net.zero_gradients()), ErrorCode::shape_mismatch,
            "shape mismatch: share does not match the model's parameters");
  }

  const EstimatedTransform& estimate() const { return est_; }
  std::size_t label() const { return label_; }
  std::size_t latent_dim() const { return gen_.latent_dim; }

  GradientVector candidate_gradients(std::span<const double> z) const {
    const Tensor image = generate(gen_, z).reshaped(net_.input_shape());
    return apply_estimated(param_gradients(net_, image, label_), est_);
  }

  // D(y, y~) for an already-transformed candidate gradient.
  double matching_loss(const GradientVector& y_tilde) const {
    const std::vector<double> flat = y_tilde.flatten_concat();
    if (cfg_.loss == LossKind::l2) return loss_l2(observed_, flat);
    double tt = 0.0;
    for (double v : flat) tt += v * v;
    // A fully masked candidate carries no direction; score it as orthogonal.
    if (tt == 0.0) return 1.0;
    return loss_cosine(observed_, flat);
  }

  ObjectiveParts parts(std::span<const double> z) const {
    ObjectiveParts p;
    p.matching = matching_loss(candidate_gradients(z));
    p.regularization = cfg_.lambda > 0.0 ? regularizer(cfg_.regularizer, z) : 0.0;
    p.total = p.matching + cfg_.lambda * p.regularization;
    return p;
  }

  double operator()(std::span<const double> z) const { return parts(z).total; }

 private:
  const Network& net_;
  const Generator& gen_;
  std::size_t label_;
  EstimatedTransform est_;
  AttackConfig cfg_;
  std::vector<double> observed_;
};

// --- attack -----------------------------------------------------------------

struct ReconstructionMetrics {
  double mse_image = 0.0;
  double psnr = 0.0;
  double mse_representation = 0.0;
};

struct AttackReport {
  std::vector<double> best_latent;
  Tensor image;
  std::size_t label = 0;
  EstimatedTransform estimate;
  std::vector<optim::TracePoint> history;
  double objective = 0.0;
  double matching = 0.0;
  double regularization = 0.0;
  std::size_t evaluations = 0;
  std::string optimizer;
  std::string termination;
  std::vector<std::string> warnings;
  double seconds = 0.0;
  std::optional<ReconstructionMetrics> metrics;
};

inline std::vector<double> squash_latent(std::span<const double> u, double bound) {
  std::vector<double> z(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) z[i] = bound * std::tanh(u[i]);
  return z;
}

inline AttackReport attack(const SharedGradients& share, const Generator& gen, const Network& net,
                           const AttackConfig& cfg, RandomSource& rng) {
  cfg.validate();
  require(share.model_id == model_id(net), ErrorCode::model_mismatch,
          "model mismatch: share was produced by " + share.model_id);
  const auto start = std::chrono::steady_clock::now();

  AttackReport report;
  report.label = infer_label(share);
  const AttackObjective objective(share, net, gen, report.label,
                                  estimate_transform(share, cfg.estimation), cfg);
  const std::size_t k = gen.latent_dim;
  const double b = cfg.bound;
  const std::uint64_t opt_seed = rng.next_u64();

  // CMA-ES and Adam search an unbounded u with z = b tanh(u).
  const optim::ObjectiveFn squashed = [&](std::span<const double> u) {
    return objective(squash_latent(u, b));
  };
  const optim::ObjectiveFn boxed = [&](std::span<const double> z) { return objective(z); };

  optim::OptRun run;
  if (const auto* c = std::get_if<optim::CmaesConfig>(&cfg.optimizer)) {
    optim::CmaesConfig oc = *c;
    oc.seed = opt_seed;
    run = optim::cmaes_minimize(squashed, k, oc);
    run.best_point = squash_latent(run.best_point, b);
    report.optimizer = "cmaes";
  } else if (const auto* t = std::get_if<optim::TurboConfig>(&cfg.optimizer)) {
    optim::TurboConfig oc = *t;
    oc.seed = opt_seed;
    oc.lower = -b;
    oc.upper = b;
    run = optim::turbo_minimize(boxed, k, oc);
    report.optimizer = "turbo";
  } else {
    optim::AdamConfig oc = std::get<optim::AdamConfig>(cfg.optimizer);
    oc.seed = opt_seed;
    RandomSource init(split_seed(opt_seed, 1));
    std::vector<double> u0(k);
    for (double& u : u0) u = std::atanh(std::clamp(init.normal(), -0.9 * b, 0.9 * b) / b);
    run = optim::fd_adam_minimize(squashed, u0, oc);
    run.best_point = squash_latent(run.best_point, b);
    report.optimizer = "adam";
  }

  report.best_latent = run.best_point;
  report.image = generate(gen, report.best_latent);
  const ObjectiveParts parts = objective.parts(report.best_latent);
  report.objective = parts.total;
  report.matching = parts.matching;
  report.regularization = parts.regularization;
  report.estimate = objective.estimate();
  report.history = std::move(run.trace);
  report.evaluations = run.evaluations;
  report.termination = run.termination;
  report.warnings = std::move(run.warnings);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace ggl
