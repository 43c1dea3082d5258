#pragma once

// The simulated FL client: one local step on one private example, degraded by
// the configured defense, packaged as the share the server observes.

#include <string>
#include <vector>

#include "ggl/container.hpp"
#include "ggl/defense.hpp"
#include "ggl/nn.hpp"

namespace ggl {

struct SharedGradients {
  GradientVector grads;
  std::string model_id;
  Shape image_shape;
  std::size_t class_count = 0;

  friend bool operator==(const SharedGradients&, const SharedGradients&) = default;
};

inline SharedGradients produce_share(const Network& net, const Tensor& x, std::size_t label,
                                     const DefenseConfig& cfg, RandomSource& rng) {
  return {apply_defense(net, x, label, cfg, rng), model_id(net), net.input_shape(),
          net.class_count()};
}

inline SharedGradients produce_share(const Network& net, const Tensor& x, std::size_t label,
                                     const DefenseConfig& cfg) {
  RandomSource rng(cfg.seed);
  return produce_share(net, x, label, cfg, rng);
}

// GGLG container. Metadata travels as tensors under the "__meta__/" prefix;
// the model id is carried in the name of a one-element tensor.
inline Bytes encode_share(const SharedGradients& s) {
  std::vector<ContainerEntry> entries;
  entries.push_back({"__meta__/model/" + s.model_id, Tensor::vector({0.0})});
  std::vector<double> shape(s.image_shape.begin(), s.image_shape.end());
  entries.push_back({"__meta__/image_shape", Tensor::vector(std::move(shape))});
  entries.push_back({"__meta__/class_count", Tensor::vector({static_cast<double>(s.class_count)})});
  for (const auto& e : s.grads.entries) entries.push_back({e.key(), e.value});
  return encode_container(kGradientMagic, entries);
}

inline SharedGradients decode_share(std::span<const std::uint8_t> bytes) {
  const auto entries = decode_container(kGradientMagic, bytes);
  SharedGradients s;
  bool have_model = false, have_shape = false, have_classes = false;
  static const std::string model_prefix = "__meta__/model/";
  for (const auto& e : entries) {
    if (e.name.starts_with(model_prefix)) {
      s.model_id = e.name.substr(model_prefix.size());
      have_model = true;
    } else if (e.name == "__meta__/image_shape") {
      for (double v : e.tensor.data()) s.image_shape.push_back(detail::as_count(v, "image shape"));
      have_shape = true;
    } else if (e.name == "__meta__/class_count") {
      s.class_count = detail::as_count(e.tensor[0], "class count");
      have_classes = true;
    } else {
      require(!e.name.starts_with("__"), ErrorCode::shape_mismatch,
              "shape mismatch: unknown metadata '" + e.name + "'");
      const auto dot_pos = e.name.rfind('.');
      require(dot_pos != std::string::npos, ErrorCode::shape_mismatch,
              "shape mismatch: unexpected tensor '" + e.name + "'");
      s.grads.entries.push_back({e.name.substr(0, dot_pos), e.name.substr(dot_pos + 1), e.tensor});
    }
  }
  require(have_model && have_shape && have_classes, ErrorCode::shape_mismatch,
          "shape mismatch: gradient container lacks share metadata");
  return s;
}

}  // namespace ggl
