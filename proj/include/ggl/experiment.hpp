#pragma once

// Materializes the objects an ExperimentConfig describes. Relative paths are
// resolved against the directory holding the config file.

#include <filesystem>

#include "ggl/config.hpp"
#include "ggl/container.hpp"
#include "ggl/generator.hpp"
#include "ggl/image_io.hpp"
#include "ggl/report.hpp"

namespace ggl {

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline Network build_network(const ExperimentConfig& cfg, const std::filesystem::path& base = {}) {
  Network net = cfg.model.weights.empty()
                    ? presets::by_name(cfg.model.preset, cfg.model.input_shape, cfg.model.classes,
                                       cfg.model_seed())
                    : decode_network(read_file(resolve_path(base, cfg.model.weights)));
  if (!cfg.model.id.empty())
    require(model_id(net) == cfg.model.id, ErrorCode::model_mismatch,
            "model mismatch: weights hash to " + model_id(net) + ", config declares " + cfg.model.id);
  return net;
}

inline Generator build_generator(const ExperimentConfig& cfg, const std::filesystem::path& base = {}) {
  if (!cfg.generator.path.empty()) {
    Generator g = load_generator(read_file(resolve_path(base, cfg.generator.path)));
    require(g.latent_dim == cfg.generator.latent_dim, ErrorCode::shape_mismatch,
            "shape mismatch: generator file has latent_dim " + std::to_string(g.latent_dim) +
                ", config declares " + std::to_string(cfg.generator.latent_dim));
    return g;
  }
  return random_generator(cfg.generator.kind, cfg.generator.latent_dim, cfg.generator.output_shape,
                          cfg.generator_seed());
}

inline Tensor load_image(const std::filesystem::path& path, const Shape& expected) {
  Tensor image = decode_image(read_file(path));
  require(image.shape() == expected, ErrorCode::shape_mismatch,
          "shape mismatch: image " + path.string() + " is " + shape_string(image.shape()) +
              ", expected " + shape_string(expected));
  return image;
}

inline DefenseConfig resolved_defense(const ExperimentConfig& cfg) {
  DefenseConfig d = cfg.defense;
  d.seed = cfg.resolved_defense_seed();
  return d;
}

}  // namespace ggl
