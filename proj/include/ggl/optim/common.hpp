#pragma once

#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "ggl/error.hpp"

namespace ggl::optim {

// Pure map R^k -> R. Must be safe to call concurrently when threads > 1.
using ObjectiveFn = std::function<double(std::span<const double>)>;

struct TracePoint {
  std::size_t generation = 0;
  std::size_t evaluations = 0;
  double best_value = 0.0;
  double step = 0.0;  // CMA-ES sigma, TuRBO trust-region length, Adam gradient norm
};

struct OptRun {
  std::vector<double> best_point;
  double best_value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  std::vector<TracePoint> trace;
  std::string termination;
  std::vector<std::string> warnings;

  // Returns true when the point improved the incumbent.
  bool offer(std::span<const double> point, double value) {
    if (value < best_value) {
      best_value = value;
      best_point.assign(point.begin(), point.end());
      return true;
    }
    return false;
  }

  void record(std::size_t generation, double step) {
    trace.push_back({generation, evaluations, best_value, step});
  }
};

// Evaluates every point; results are stored by candidate index so the outcome
// does not depend on scheduling. Non-finite values raise an error naming the
// offending candidate.
inline std::vector<double> evaluate_batch(const ObjectiveFn& f,
                                          const std::vector<std::vector<double>>& points,
                                          unsigned threads = 1) {
  std::vector<double> values(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < points.size(); i += stride) {
      try {
        values[i] = f(points[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1 || points.size() < 2) {
    work(0, 1);
  } else {
    const std::size_t n = std::min<std::size_t>(threads, points.size());
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(work, t, n);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    require(std::isfinite(values[i]), ErrorCode::non_finite,
            "objective returned a non-finite value for candidate " + std::to_string(i));
  }
  return values;
}

}  // namespace ggl::optim
