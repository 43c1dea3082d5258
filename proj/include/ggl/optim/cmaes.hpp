#pragma once

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and
// rank-mu covariance updates. Strategy constants are the standard defaults of
// Hansen's CMA-ES tutorial.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ggl/optim/common.hpp"
#include "ggl/tensor.hpp"

namespace ggl::optim {

struct CmaesConfig {
  std::size_t population = 50;
  std::size_t max_generations = 300;
  double initial_step = 0.5;
  std::vector<double> initial_mean;  // empty: origin
  std::uint64_t seed = 0;
  double tol_x = 1e-13;
  std::optional<double> target;      // stop once best value <= target
  std::size_t max_evaluations = 0;   // 0: no limit beyond generations
  unsigned threads = 1;
};

inline constexpr double kEigenFloor = 1e-14;

inline OptRun cmaes_minimize(const ObjectiveFn& f, std::size_t dim, const CmaesConfig& cfg) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  require(dim >= 1, ErrorCode::invalid_argument, "dimension must be at least 1");
  require(cfg.population >= 4, ErrorCode::invalid_argument, "population must be at least 4");
  require(cfg.initial_step > 0.0, ErrorCode::invalid_argument, "initial step must be positive");
  require(cfg.initial_mean.empty() || cfg.initial_mean.size() == dim, ErrorCode::shape_mismatch,
          "shape mismatch: initial mean has wrong dimension");

  const auto n = static_cast<double>(dim);
  const std::size_t lambda = cfg.population;
  const std::size_t mu = lambda / 2;
  VectorXd weights(mu);
  for (std::size_t i = 0; i < mu; ++i)
    weights[i] = std::log((static_cast<double>(lambda) + 1.0) / 2.0) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu =
      std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) * (n + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  VectorXd mean = VectorXd::Zero(static_cast<Eigen::Index>(dim));
  if (!cfg.initial_mean.empty())
    mean = Eigen::Map<const VectorXd>(cfg.initial_mean.data(), static_cast<Eigen::Index>(dim));
  double sigma = cfg.initial_step;
  const auto d = static_cast<Eigen::Index>(dim);
  MatrixXd C = MatrixXd::Identity(d, d);
  MatrixXd B = MatrixXd::Identity(d, d);
  VectorXd D = VectorXd::Ones(d);
  VectorXd pc = VectorXd::Zero(d);
  VectorXd ps = VectorXd::Zero(d);

  RandomSource rng(cfg.seed);
  OptRun run;
  std::vector<std::vector<double>> points(lambda, std::vector<double>(dim));
  MatrixXd steps(d, static_cast<Eigen::Index>(lambda));

  for (std::size_t gen = 0; gen < cfg.max_generations; ++gen) {
    for (std::size_t k = 0; k < lambda; ++k) {
      VectorXd z(d);
      for (Eigen::Index i = 0; i < d; ++i) z[i] = rng.normal();
      const VectorXd y = B * D.cwiseProduct(z);
      steps.col(static_cast<Eigen::Index>(k)) = y;
      const VectorXd x = mean + sigma * y;
      std::copy(x.data(), x.data() + d, points[k].begin());
    }
    const std::vector<double> values = evaluate_batch(f, points, cfg.threads);
    run.evaluations += lambda;

    std::vector<std::size_t> order(lambda);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    run.offer(points[order[0]], values[order[0]]);

    VectorXd y_w = VectorXd::Zero(d);
    for (std::size_t i = 0; i < mu; ++i)
      y_w += weights[static_cast<Eigen::Index>(i)] * steps.col(static_cast<Eigen::Index>(order[i]));
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const VectorXd c_inv_sqrt_yw = B * (B.transpose() * y_w).cwiseQuotient(D);
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_yw;
    const double ps_norm = ps.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(gen + 1)));
    const bool hsig = ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * chi_n;
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    MatrixXd rank_mu = MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < mu; ++i) {
      const auto col = steps.col(static_cast<Eigen::Index>(order[i]));
      rank_mu += weights[static_cast<Eigen::Index>(i)] * col * col.transpose();
    }
    const double hsig_correction = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + hsig_correction * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose());

    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    VectorXd evals = eig.eigenvalues();
    if (evals.minCoeff() <= 0.0) {
      run.warnings.push_back("generation " + std::to_string(gen) +
                             ": covariance eigenvalue floored at 1e-14");
      evals = evals.cwiseMax(kEigenFloor);
      C = eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
    }
    B = eig.eigenvectors();
    D = evals.cwiseSqrt();

    run.record(gen, sigma);

    if (cfg.target && run.best_value <= *cfg.target) {
      run.termination = "target";
      return run;
    }
    if (sigma * D.maxCoeff() < cfg.tol_x) {
      run.termination = "tolx";
      return run;
    }
    if (cfg.max_evaluations && run.evaluations + lambda > cfg.max_evaluations) {
      run.termination = "budget";
      return run;
    }
  }
  run.termination = "generations";
  return run;
}

}  // namespace ggl::optim
