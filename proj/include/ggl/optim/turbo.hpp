#pragma once

// Single trust-region Bayesian optimization (TuRBO-1 style) inside a box.
//
// The search runs in the unit cube. A GP with an ARD squared-exponential
// kernel is fitted to the evaluated points closest to the incumbent, batches
// are chosen by Thompson sampling over candidates drawn inside a
// length-scale-weighted hyper-rectangle, and the rectangle doubles after
// success_tol consecutive improving batches and halves after fail_tol
// consecutive failures. The run ends when the budget is spent or the side
// length drops below length_min.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ggl/optim/common.hpp"
#include "ggl/tensor.hpp"

namespace ggl::optim {

struct TurboConfig {
  std::size_t n_init = 256;
  std::size_t batch = 10;
  double lower = -2.0;
  double upper = 2.0;
  std::size_t budget = 500;
  std::uint64_t seed = 0;
  double length_init = 0.8;
  double length_min = 0.0078125;  // 0.5^7
  double length_max = 1.6;
  std::size_t success_tol = 3;
  std::size_t fail_tol = 5;
  std::size_t candidates = 0;      // 0: min(100 * dim, 1000)
  std::size_t max_gp_points = 128;
  std::size_t hyper_iterations = 30;
  unsigned threads = 1;
};

// ARD squared-exponential GP on standardized targets.
class GaussianProcess {
 public:
  struct Hyper {
    Eigen::VectorXd log_lengthscale;
    double log_outputscale = 0.0;
    double log_noise = std::log(5e-3);
  };

  static constexpr double kMinLength = 0.005, kMaxLength = 2.0;
  static constexpr double kMinOutput = 0.05, kMaxOutput = 20.0;
  static constexpr double kMinNoise = 5e-4, kMaxNoise = 0.2;

  explicit GaussianProcess(std::size_t dim) {
    hyper_.log_lengthscale = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), std::log(0.5));
  }

  const Hyper& hyper() const { return hyper_; }
  Eigen::VectorXd lengthscales() const { return hyper_.log_lengthscale.array().exp(); }

  // Maximizes the log marginal likelihood with Adam on log-parameters, warm
  // started from the previous fit, then factorizes the final kernel.
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t iterations) {
    X_ = X;
    y_ = y;
    const Eigen::Index d = X.cols();
    const Eigen::Index np = d + 2;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(np), v = Eigen::VectorXd::Zero(np);
    for (std::size_t t = 1; t <= iterations; ++t) {
      const Eigen::VectorXd g = log_likelihood_gradient();
      for (Eigen::Index i = 0; i < np; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * g[i];
        v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
        const double mh = m[i] / (1.0 - std::pow(0.9, static_cast<double>(t)));
        const double vh = v[i] / (1.0 - std::pow(0.999, static_cast<double>(t)));
        const double step = 0.1 * mh / (std::sqrt(vh) + 1e-8);  // ascent
        param(i) += step;
      }
      clamp_hyper();
    }
    factorize();
  }

  // Joint posterior at the rows of Xs: mean and covariance (standardized units).
  void posterior(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const {
    const Eigen::MatrixXd Ks = cross_kernel(Xs, X_);
    mean = Ks * alpha_;
    const Eigen::MatrixXd V = chol_.matrixL().solve(Ks.transpose());
    cov = cross_kernel(Xs, Xs) - V.transpose() * V;
  }

 private:
  double& param(Eigen::Index i) {
    const Eigen::Index d = hyper_.log_lengthscale.size();
    if (i < d) return hyper_.log_lengthscale[i];
    return i == d ? hyper_.log_outputscale : hyper_.log_noise;
  }

  void clamp_hyper() {
    for (Eigen::Index i = 0; i < hyper_.log_lengthscale.size(); ++i)
      hyper_.log_lengthscale[i] =
          std::clamp(hyper_.log_lengthscale[i], std::log(kMinLength), std::log(kMaxLength));
    hyper_.log_outputscale =
        std::clamp(hyper_.log_outputscale, std::log(kMinOutput), std::log(kMaxOutput));
    hyper_.log_noise = std::clamp(hyper_.log_noise, std::log(kMinNoise), std::log(kMaxNoise));
  }

  Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const {
    const Eigen::ArrayXd inv_ls = (-hyper_.log_lengthscale).array().exp();
    const double s2 = std::exp(hyper_.log_outputscale);
    Eigen::MatrixXd K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
      for (Eigen::Index j = 0; j < B.rows(); ++j) {
        const double r2 = ((A.row(i) - B.row(j)).array().transpose() * inv_ls).square().sum();
        K(i, j) = s2 * std::exp(-0.5 * r2);
      }
    return K;
  }

  Eigen::MatrixXd train_kernel() const {
    Eigen::MatrixXd K = cross_kernel(X_, X_);
    K.diagonal().array() += std::exp(hyper_.log_noise);
    return K;
  }

  static Eigen::LLT<Eigen::MatrixXd> robust_cholesky(Eigen::MatrixXd K) {
    double jitter = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::LLT<Eigen::MatrixXd> llt(K);
      if (llt.info() == Eigen::Success) return llt;
      const double next = jitter == 0.0 ? 1e-8 : jitter * 10.0;
      K.diagonal().array() += next - jitter;
      jitter = next;
    }
    fail(ErrorCode::singular, "Gaussian-process kernel matrix is singular after jitter retries");
  }

  void factorize() {
    chol_ = robust_cholesky(train_kernel());
    alpha_ = chol_.solve(y_);
  }

  Eigen::VectorXd log_likelihood_gradient() const {
    const Eigen::Index n = X_.rows(), d = X_.cols();
    const Eigen::MatrixXd Kf = cross_kernel(X_, X_);
    Eigen::MatrixXd K = Kf;
    const double noise = std::exp(hyper_.log_noise);
    K.diagonal().array() += noise;
    const auto llt = robust_cholesky(K);
    const Eigen::VectorXd alpha = llt.solve(y_);
    const Eigen::MatrixXd W =
        alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::VectorXd g(d + 2);
    const Eigen::ArrayXd inv_ls2 = (-2.0 * hyper_.log_lengthscale).array().exp();
    for (Eigen::Index k = 0; k < d; ++k) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          const double diff = X_(i, k) - X_(j, k);
          acc += W(i, j) * Kf(i, j) * diff * diff * inv_ls2[k];
        }
      g[k] = 0.5 * acc;
    }
    g[d] = 0.5 * (W.array() * Kf.array()).sum();
    g[d + 1] = 0.5 * W.trace() * noise;
    return g;
  }

  Hyper hyper_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

namespace detail {

inline std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::size_t dim,
                                                        RandomSource& rng) {
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    for (std::size_t i = 0; i < n; ++i)
      pts[i][j] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
  }
  for (auto& p : pts)
    for (double& v : p) v = std::clamp(v, 0.0, 1.0);
  return pts;
}

}  // namespace detail

inline OptRun turbo_minimize(const ObjectiveFn& f, std::size_t dim, const TurboConfig& cfg) {
  require(dim >= 1, ErrorCode::invalid_argument, "dimension must be at least 1");
  require(cfg.upper > cfg.lower, ErrorCode::invalid_argument, "empty box");
  require(cfg.n_init >= 2 && cfg.batch >= 1, ErrorCode::invalid_argument,
          "n_init must be >= 2 and batch >= 1");
  require(cfg.budget > cfg.n_init, ErrorCode::invalid_argument, "budget must exceed n_init");

  RandomSource rng(cfg.seed);
  const double width = cfg.upper - cfg.lower;
  auto to_box = [&](const std::vector<double>& u) {
    std::vector<double> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      x[i] = std::clamp(cfg.lower + width * u[i], cfg.lower, cfg.upper);
    return x;
  };

  std::vector<std::vector<double>> unit_pts;  // evaluated points in [0, 1]^d
  std::vector<double> values;
  OptRun run;
  std::size_t best_index = 0;

  auto evaluate = [&](const std::vector<std::vector<double>>& batch) {
    std::vector<std::vector<double>> box;
    box.reserve(batch.size());
    for (const auto& u : batch) box.push_back(to_box(u));
    const std::vector<double> v = evaluate_batch(f, box, cfg.threads);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      unit_pts.push_back(batch[i]);
      values.push_back(v[i]);
      if (run.offer(box[i], v[i])) best_index = unit_pts.size() - 1;
    }
    run.evaluations += batch.size();
    return v;
  };

  evaluate(detail::latin_hypercube(cfg.n_init, dim, rng));
  double length = cfg.length_init;
  std::size_t successes = 0, failures = 0, generation = 0;
  run.record(generation++, length);

  const std::size_t n_cand = cfg.candidates ? cfg.candidates : std::min<std::size_t>(100 * dim, 1000);
  const double perturb_prob = std::min(20.0 / static_cast<double>(dim), 1.0);
  GaussianProcess gp(dim);
  const auto d = static_cast<Eigen::Index>(dim);

  while (run.evaluations < cfg.budget) {
    if (length < cfg.length_min) {
      run.termination = "trust region collapsed";
      return run;
    }
    const std::size_t q = std::min(cfg.batch, cfg.budget - run.evaluations);
    const std::vector<double>& center = unit_pts[best_index];

    // Training set: points nearest the incumbent.
    std::vector<std::size_t> idx(unit_pts.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto dist2 = [&](std::size_t i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += (unit_pts[i][j] - center[j]) * (unit_pts[i][j] - center[j]);
      return s;
    };
    const std::size_t n_train = std::min(cfg.max_gp_points, idx.size());
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dist2(a) < dist2(b); });
    idx.resize(n_train);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n_train), d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_train));
    for (std::size_t r = 0; r < n_train; ++r) {
      for (std::size_t j = 0; j < dim; ++j)
        X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = unit_pts[idx[r]][j];
      y[static_cast<Eigen::Index>(r)] = values[idx[r]];
    }
    const double y_mean = y.mean();
    double y_std = std::sqrt((y.array() - y_mean).square().mean());
    if (!(y_std > 0.0)) y_std = 1.0;
    y = (y.array() - y_mean) / y_std;
    gp.fit(X, y, cfg.hyper_iterations);

    // Trust region weighted by relative length-scales (geometric mean 1).
    Eigen::VectorXd w = gp.lengthscales();
    w /= w.mean();
    w /= std::pow(w.prod(), 1.0 / static_cast<double>(dim));
    std::vector<double> lb(dim), ub(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      lb[j] = std::clamp(center[j] - w[static_cast<Eigen::Index>(j)] * length / 2.0, 0.0, 1.0);
      ub[j] = std::clamp(center[j] + w[static_cast<Eigen::Index>(j)] * length / 2.0, 0.0, 1.0);
    }

    Eigen::MatrixXd cand(static_cast<Eigen::Index>(n_cand), d);
    for (std::size_t c = 0; c < n_cand; ++c) {
      bool any = false;
      for (std::size_t j = 0; j < dim; ++j) {
        const bool perturb = rng.uniform() <= perturb_prob;
        const double u = lb[j] + (ub[j] - lb[j]) * rng.uniform();
        cand(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = perturb ? u : center[j];
        any = any || perturb;
      }
      if (!any) {
        const std::size_t j = rng.uniform_index(dim);
        cand(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
            lb[j] + (ub[j] - lb[j]) * rng.uniform();
      }
    }

    Eigen::VectorXd mu;
    Eigen::MatrixXd cov;
    gp.posterior(cand, mu, cov);
    cov = 0.5 * (cov + cov.transpose());
    Eigen::MatrixXd L;
    {
      double jitter = 1e-10;
      for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd K = cov;
        K.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(K);
        if (llt.info() == Eigen::Success) {
          L = llt.matrixL();
          break;
        }
        require(attempt < 8, ErrorCode::singular, "posterior covariance is not positive definite");
        jitter *= 10.0;
      }
    }
    std::vector<bool> taken(n_cand, false);
    std::vector<std::vector<double>> batch;
    for (std::size_t s = 0; s < q; ++s) {
      Eigen::VectorXd eps(static_cast<Eigen::Index>(n_cand));
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
      const Eigen::VectorXd sample = mu + L * eps;
      std::size_t pick = n_cand;
      for (std::size_t c = 0; c < n_cand; ++c)
        if (!taken[c] && (pick == n_cand || sample[static_cast<Eigen::Index>(c)] <
                                                sample[static_cast<Eigen::Index>(pick)]))
          pick = c;
      taken[pick] = true;
      std::vector<double> u(dim);
      for (std::size_t j = 0; j < dim; ++j)
        u[j] = cand(static_cast<Eigen::Index>(pick), static_cast<Eigen::Index>(j));
      batch.push_back(std::move(u));
    }

    const double previous_best = run.best_value;
    const std::vector<double> v = evaluate(batch);
    const double batch_best = *std::min_element(v.begin(), v.end());
    if (batch_best < previous_best - 1e-3 * std::abs(previous_best)) {
      ++successes;
      failures = 0;
    } else {
      successes = 0;
      ++failures;
    }
    if (successes >= cfg.success_tol) {
      length = std::min(2.0 * length, cfg.length_max);
      successes = 0;
    } else if (failures >= cfg.fail_tol) {
      length /= 2.0;
      failures = 0;
    }
    run.record(generation++, length);
  }
  run.termination = "budget";
  return run;
}

}  // namespace ggl::optim
