#pragma once

// Latent-to-image decoders used as the image prior. Outputs live in [0, 1]:
// the final tanh is mapped through (t + 1) / 2.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ggl/container.hpp"
#include "ggl/error.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

struct LatentVector {
  std::vector<double> values;
  std::optional<double> bound;

  std::size_t dim() const { return values.size(); }

  void project() {
    if (!bound) return;
    for (double& v : values) v = std::clamp(v, -*bound, *bound);
  }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;
};

enum class GeneratorKind { linear_decoder = 0, deconv_net = 1 };

inline std::string to_string(GeneratorKind kind) {
  return kind == GeneratorKind::linear_decoder ? "linear" : "deconv";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "linear") return GeneratorKind::linear_decoder;
  if (s == "deconv") return GeneratorKind::deconv_net;
  fail(ErrorCode::invalid_argument, "unknown generator kind '" + s + "'");
}

struct Generator {
  GeneratorKind kind = GeneratorKind::linear_decoder;
  std::size_t latent_dim = 0;
  Shape output_shape;  // (channels, height, width)
  std::vector<NamedTensor> params;

  std::size_t output_size() const { return shape_size(output_shape); }

  const Tensor& param(const std::string& key) const {
    for (const auto& p : params)
      if (p.key() == key) return p.value;
    fail(ErrorCode::shape_mismatch, "shape mismatch: generator lacks '" + key + "'");
  }

  friend bool operator==(const Generator&, const Generator&) = default;
};

namespace detail {

// DeconvNet plan: Dense(k -> 32*4*4), TConv(32 -> 16, 2x2, s2), ReLU,
// TConv(16 -> c, 2x2, s2), tanh. Only 16x16 outputs are supported.
inline constexpr std::size_t kDeconvBase = 4;
inline constexpr std::size_t kDeconvC0 = 32;
inline constexpr std::size_t kDeconvC1 = 16;

struct GeneratorShapes {
  std::vector<std::pair<std::string, Shape>> params;
  std::vector<std::size_t> fan_in;
};

inline GeneratorShapes generator_shapes(GeneratorKind kind, std::size_t k, const Shape& out) {
  require(k >= 1, ErrorCode::invalid_argument, "latent dimension must be at least 1");
  require(out.size() == 3 && out[0] > 0 && out[1] > 0 && out[2] > 0, ErrorCode::shape_mismatch,
          "generator output shape must be (channels, height, width)");
  if (kind == GeneratorKind::linear_decoder) {
    const std::size_t p = shape_size(out);
    return {{{"decoder.weight", {p, k}}, {"decoder.bias", {p}}}, {k, k}};
  }
  require(out[1] == 4 * kDeconvBase && out[2] == 4 * kDeconvBase, ErrorCode::invalid_argument,
          "unsupported output shape " + shape_string(out) +
              " for the DeconvNet stride plan (needs 16x16)");
  const std::size_t c = out[0];
  const std::size_t base = kDeconvC0 * kDeconvBase * kDeconvBase;
  return {{{"fc.weight", {base, k}},
           {"fc.bias", {base}},
           {"tconv1.weight", {kDeconvC0, kDeconvC1, 2, 2}},
           {"tconv1.bias", {kDeconvC1}},
           {"tconv2.weight", {kDeconvC1, c, 2, 2}},
           {"tconv2.bias", {c}}},
          {k, k, kDeconvC0 * 4, kDeconvC0 * 4, kDeconvC1 * 4, kDeconvC1 * 4}};
}

inline void validate_generator(const Generator& g) {
  const auto shapes = generator_shapes(g.kind, g.latent_dim, g.output_shape);
  require(g.params.size() == shapes.params.size(), ErrorCode::shape_mismatch,
          "shape mismatch: generator has " + std::to_string(g.params.size()) +
              " parameter tensors, expected " + std::to_string(shapes.params.size()));
  for (std::size_t i = 0; i < shapes.params.size(); ++i) {
    const auto& [key, shape] = shapes.params[i];
    require(g.params[i].key() == key, ErrorCode::shape_mismatch,
            "shape mismatch: expected parameter '" + key + "', found '" + g.params[i].key() + "'");
    require(g.params[i].value.shape() == shape, ErrorCode::shape_mismatch,
            "shape mismatch: '" + key + "' is " + shape_string(g.params[i].value.shape()) +
                ", expected " + shape_string(shape));
  }
}

// Transposed convolution with a 2x2 kernel and stride 2; weight (cin, cout, 2, 2).
inline std::vector<double> tconv2x2(std::span<const double> in, std::size_t cin, std::size_t h,
                                    std::size_t w, const Tensor& weight, const Tensor& bias) {
  const std::size_t cout = bias.size();
  std::vector<double> out(cout * 4 * h * w);
  const std::size_t oh = 2 * h, ow = 2 * w;
  for (std::size_t o = 0; o < cout; ++o)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(o * oh * ow), oh * ow, bias[o]);
  const auto wd = weight.data();
  for (std::size_t c = 0; c < cin; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double v = in[(c * h + i) * w + j];
        if (v == 0.0) continue;
        for (std::size_t o = 0; o < cout; ++o) {
          const double* k = wd.data() + ((c * cout + o) * 4);
          double* dst = out.data() + (o * oh + 2 * i) * ow + 2 * j;
          dst[0] += v * k[0];
          dst[1] += v * k[1];
          dst[ow] += v * k[2];
          dst[ow + 1] += v * k[3];
        }
      }
  return out;
}

}  // namespace detail

inline Tensor generate(const Generator& g, std::span<const double> z) {
  require(z.size() == g.latent_dim, ErrorCode::shape_mismatch,
          "dimension mismatch: latent has " + std::to_string(z.size()) + " values, generator expects " +
              std::to_string(g.latent_dim));
  require(g.params.size() == (g.kind == GeneratorKind::linear_decoder ? 2u : 6u),
          ErrorCode::shape_mismatch, "shape mismatch: incomplete generator parameters");
  auto squash = [](double t) { return (std::tanh(t) + 1.0) * 0.5; };
  if (g.kind == GeneratorKind::linear_decoder) {
    const auto& w = g.params[0].value;
    const auto& b = g.params[1].value;
    const std::size_t p = b.size();
    std::vector<double> px(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double* row = w.data().data() + i * g.latent_dim;
      double acc = b[i];
      for (std::size_t j = 0; j < g.latent_dim; ++j) acc += row[j] * z[j];
      px[i] = squash(acc);
    }
    return Tensor(g.output_shape, std::move(px));
  }
  const auto& fcw = g.params[0].value;
  const auto& fcb = g.params[1].value;
  const std::size_t base = fcb.size();
  std::vector<double> h0(base);
  for (std::size_t i = 0; i < base; ++i) {
    const double* row = fcw.data().data() + i * g.latent_dim;
    double acc = fcb[i];
    for (std::size_t j = 0; j < g.latent_dim; ++j) acc += row[j] * z[j];
    h0[i] = acc;
  }
  const std::size_t s = detail::kDeconvBase;
  std::vector<double> h1 =
      detail::tconv2x2(h0, detail::kDeconvC0, s, s, g.params[2].value, g.params[3].value);
  for (double& v : h1) v = v > 0.0 ? v : 0.0;
  std::vector<double> h2 = detail::tconv2x2(h1, detail::kDeconvC1, 2 * s, 2 * s,
                                            g.params[4].value, g.params[5].value);
  for (double& v : h2) v = squash(v);
  return Tensor(g.output_shape, std::move(h2));
}

inline Tensor generate(const Generator& g, const LatentVector& z) { return generate(g, z.values); }

// Same initialization scheme as the FL model: uniform in [-a, a], a = sqrt(1 / fan_in).
inline Generator random_generator(GeneratorKind kind, std::size_t latent_dim, Shape output_shape,
                                  std::uint64_t seed) {
  const auto shapes = detail::generator_shapes(kind, latent_dim, output_shape);
  Generator g{kind, latent_dim, std::move(output_shape), {}};
  RandomSource rng(seed);
  for (std::size_t i = 0; i < shapes.params.size(); ++i) {
    const auto& [key, shape] = shapes.params[i];
    const double a = std::sqrt(1.0 / static_cast<double>(shapes.fan_in[i]));
    const auto dot_pos = key.find('.');
    g.params.push_back({key.substr(0, dot_pos), key.substr(dot_pos + 1),
                        uniform_sample(rng, shape, -a, a)});
  }
  return g;
}

// GGLW container with a "__generator__" header tensor [kind, k, c, h, w].
inline Bytes save_generator(const Generator& g) {
  detail::validate_generator(g);
  std::vector<ContainerEntry> entries;
  entries.push_back(
      {"__generator__",
       Tensor::vector({static_cast<double>(g.kind), static_cast<double>(g.latent_dim),
                       static_cast<double>(g.output_shape[0]), static_cast<double>(g.output_shape[1]),
                       static_cast<double>(g.output_shape[2])})});
  for (const auto& p : g.params) entries.push_back({p.key(), p.value});
  return encode_container(kWeightMagic, entries);
}

inline Generator load_generator(std::span<const std::uint8_t> bytes) {
  const auto entries = decode_container(kWeightMagic, bytes);
  require(!entries.empty() && entries[0].name == "__generator__" && entries[0].tensor.size() == 5,
          ErrorCode::shape_mismatch, "shape mismatch: missing generator header");
  const auto& h = entries[0].tensor;
  const std::size_t kind = detail::as_count(h[0], "generator kind");
  require(kind <= 1, ErrorCode::shape_mismatch, "shape mismatch: unknown generator kind");
  Generator g{static_cast<GeneratorKind>(kind), detail::as_count(h[1], "latent dim"),
              {detail::as_count(h[2], "channels"), detail::as_count(h[3], "height"),
               detail::as_count(h[4], "width")},
              {}};
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto& name = entries[i].name;
    const auto dot_pos = name.find('.');
    require(dot_pos != std::string::npos, ErrorCode::shape_mismatch,
            "shape mismatch: unexpected tensor '" + name + "'");
    g.params.push_back({name.substr(0, dot_pos), name.substr(dot_pos + 1), entries[i].tensor});
  }
  detail::validate_generator(g);
  return g;
}

}  // namespace ggl
