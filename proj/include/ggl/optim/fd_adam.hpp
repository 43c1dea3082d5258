#pragma once

// Adam on a central finite-difference gradient estimate.

#include <cmath>
#include <vector>

#include "ggl/optim/common.hpp"

namespace ggl::optim {

struct AdamConfig {
  double lr = 0.1;
  std::size_t steps = 500;
  double fd_step = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;            // no internal randomness; kept for a uniform interface
  std::size_t max_evaluations = 0;   // 0: no limit beyond steps
  unsigned threads = 1;
};

inline std::vector<double> central_difference(const ObjectiveFn& f, std::span<const double> z,
                                              double h, unsigned threads) {
  const std::size_t k = z.size();
  std::vector<std::vector<double>> probes(2 * k, std::vector<double>(z.begin(), z.end()));
  for (std::size_t i = 0; i < k; ++i) {
    probes[2 * i][i] += h;
    probes[2 * i + 1][i] -= h;
  }
  const std::vector<double> v = evaluate_batch(f, probes, threads);
  std::vector<double> g(k);
  for (std::size_t i = 0; i < k; ++i) {
    g[i] = (v[2 * i] - v[2 * i + 1]) / (2.0 * h);
    require(std::isfinite(g[i]), ErrorCode::non_finite,
            "non-finite gradient estimate in coordinate " + std::to_string(i));
  }
  return g;
}

inline OptRun fd_adam_minimize(const ObjectiveFn& f, std::vector<double> z, const AdamConfig& cfg) {
  require(!z.empty(), ErrorCode::invalid_argument, "empty starting point");
  require(cfg.lr >= 0.0 && cfg.fd_step > 0.0, ErrorCode::invalid_argument,
          "learning rate must be >= 0 and fd step > 0");
  const std::size_t k = z.size();
  OptRun run;
  run.offer(z, evaluate_batch(f, {z}, 1)[0]);
  run.evaluations = 1;
  run.record(0, 0.0);
  std::vector<double> m(k, 0.0), v(k, 0.0);
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    if (cfg.max_evaluations && run.evaluations + 2 * k + 1 > cfg.max_evaluations) {
      run.termination = "budget";
      return run;
    }
    const std::vector<double> g = central_difference(f, z, cfg.fd_step, cfg.threads);
    run.evaluations += 2 * k;
    double gnorm = 0.0;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < k; ++i) {
      gnorm += g[i] * g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      z[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
    }
    run.offer(z, evaluate_batch(f, {z}, 1)[0]);
    run.evaluations += 1;
    run.record(t, std::sqrt(gnorm));
  }
  run.termination = "steps";
  return run;
}

}  // namespace ggl::optim
