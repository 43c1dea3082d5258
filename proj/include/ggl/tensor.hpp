#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ggl/error.hpp"

namespace ggl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

// Dense row-major array of doubles. Extents are strictly positive.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    require(data_.size() == shape_size(shape_), ErrorCode::shape_mismatch,
            "shape mismatch: data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_string(shape_));
  }

  static Tensor vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_shape() const {
    for (std::size_t extent : shape_)
      require(extent > 0, ErrorCode::shape_mismatch,
              "tensor extents must be positive, got " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

inline double l2_norm(std::span<const double> values) {
  require(!values.empty(), ErrorCode::empty_input, "empty input");
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

inline double l2_norm(const Tensor& t) { return l2_norm(t.data()); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch,
          "shape mismatch: dot of " + std::to_string(a.size()) + " and " +
              std::to_string(b.size()) + " elements");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double dot(const Tensor& a, const Tensor& b) { return dot(a.data(), b.data()); }

// SplitMix64 finalizer. Used both as the generator's output function and as
// the seed-splitting hash.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Child seed for parallel or per-purpose streams:
//   child = mix64(parent ^ mix64((index + 1) * golden_gamma))
constexpr std::uint64_t split_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent ^ mix64((index + 1) * kGoldenGamma));
}

/// Deterministic random stream.
///
/// Uniforms come from a SplitMix64 counter: the n-th 64-bit output is
/// mix64(seed + n * golden_gamma), and a uniform in (0, 1] is
/// ((bits >> 11) + 1) * 2^-53. Normals use Box-Muller on consecutive
/// uniform pairs (u1, u2): r = sqrt(-2 ln u1), the pair yields r cos(2 pi u2)
/// followed by r sin(2 pi u2).
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(seed_ + counter_ * kGoldenGamma);
  }

  // (0, 1]
  double uniform() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  std::size_t uniform_index(std::size_t n) noexcept {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  RandomSource child(std::uint64_t index) const noexcept {
    return RandomSource(split_seed(seed_, index));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline Tensor gaussian_sample(RandomSource& rng, Shape shape, double mean, double std) {
  require(std::isfinite(std) && std >= 0.0, ErrorCode::invalid_argument,
          "standard deviation must be non-negative");
  Tensor out(std::move(shape));
  for (double& v : out.values()) v = mean + std * rng.normal();
  return out;
}

inline Tensor uniform_sample(RandomSource& rng, Shape shape, double lo, double hi) {
  Tensor out(std::move(shape));
  for (double& v : out.values()) v = rng.uniform(lo, hi);
  return out;
}

}  // namespace ggl
