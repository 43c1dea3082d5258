#pragma once

// Reconstruction quality metrics and latent-space loss landscapes.

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ggl/error.hpp"
#include "ggl/nn.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

inline constexpr double kPsnrCeiling = 120.0;  // reported when MSE < 1e-12

inline double mse_image(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch,
          "shape mismatch: images have " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()) + " values");
  require(!a.empty(), ErrorCode::empty_input, "empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double psnr_from_mse(double mse) {
  if (mse < 1e-12) return kPsnrCeiling;
  return 10.0 * std::log10(1.0 / mse);
}

// Peak value 1: images are in [0, 1].
inline double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse_image(a, b)); }

inline double mse_representation(const Network& net, const Tensor& a, const Tensor& b) {
  const Tensor ra = forward(net, a).representation;
  const Tensor rb = forward(net, b).representation;
  return mse_image(ra, rb);
}

struct LandscapeSample {
  double alpha = 0.0;
  double beta = 0.0;
  double loss = 0.0;
  std::optional<double> aux;
};

using LatentFn = std::function<double(std::span<const double>)>;

struct LandscapeOptions {
  double alpha_min = -0.25;
  double alpha_max = 1.25;
  std::size_t alpha_points = 7;
  double beta_min = -1.0;
  double beta_max = 1.0;
  std::size_t beta_points = 5;
};

inline std::vector<double> grid(double lo, double hi, std::size_t n) {
  require(n >= 2, ErrorCode::invalid_argument, "a landscape axis needs at least 2 points");
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    double a = i + 1 == n ? hi : lo + step * static_cast<double>(i);
    // Snap so that the segment endpoints are hit exactly.
    if (std::abs(a) < 1e-12) a = 0.0;
    if (std::abs(a - 1.0) < 1e-12) a = 1.0;
    g[i] = a;
  }
  return g;
}

// (1 - alpha) z1 + alpha z2, returning z1 / z2 exactly at alpha = 0 / 1.
inline std::vector<double> interpolate(std::span<const double> z1, std::span<const double> z2,
                                       double alpha) {
  require(z1.size() == z2.size(), ErrorCode::shape_mismatch, "shape mismatch: latent dimensions differ");
  if (alpha == 0.0) return {z1.begin(), z1.end()};
  if (alpha == 1.0) return {z2.begin(), z2.end()};
  std::vector<double> z(z1.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (1.0 - alpha) * z1[i] + alpha * z2[i];
  return z;
}

inline std::vector<LandscapeSample> landscape_1d(const LatentFn& f, std::span<const double> z1,
                                                 std::span<const double> z2,
                                                 const LandscapeOptions& opt = {},
                                                 const LatentFn& aux = {}) {
  std::vector<LandscapeSample> out;
  for (double a : grid(opt.alpha_min, opt.alpha_max, opt.alpha_points)) {
    const std::vector<double> z = interpolate(z1, z2, a);
    LandscapeSample s{a, 0.0, f(z), std::nullopt};
    if (aux) s.aux = aux(z);
    out.push_back(s);
  }
  return out;
}

// z(alpha, beta) = z1 + alpha (z2 - z1) + beta eta, with eta rescaled to
// |z2 - z1|. Rows are beta-major, columns follow alpha.
inline std::vector<LandscapeSample> landscape_2d(const LatentFn& f, std::span<const double> z1,
                                                 std::span<const double> z2,
                                                 std::span<const double> eta,
                                                 const LandscapeOptions& opt = {},
                                                 const LatentFn& aux = {}) {
  require(eta.size() == z1.size(), ErrorCode::shape_mismatch, "shape mismatch: direction dimension");
  double span_norm = 0.0, eta_norm = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    span_norm += (z2[i] - z1[i]) * (z2[i] - z1[i]);
    eta_norm += eta[i] * eta[i];
  }
  require(eta_norm > 0.0, ErrorCode::invalid_argument, "direction vector must be nonzero");
  const double scale = std::sqrt(span_norm) / std::sqrt(eta_norm);
  const std::vector<double> alphas = grid(opt.alpha_min, opt.alpha_max, opt.alpha_points);
  std::vector<LandscapeSample> out;
  for (double b : grid(opt.beta_min, opt.beta_max, opt.beta_points)) {
    for (double a : alphas) {
      std::vector<double> z = interpolate(z1, z2, a);
      if (b != 0.0)
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += b * scale * eta[i];
      LandscapeSample s{a, b, f(z), std::nullopt};
      if (aux) s.aux = aux(z);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace ggl
