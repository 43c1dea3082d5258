#pragma once

// Binary PGM (P5) / PPM (P6) with maxval 255. Images are (channels, height,
// width) tensors in [0, 1]; a pixel byte v maps to v / 255 and back through
// round(v * 255) clamped to [0, 255].

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "ggl/container.hpp"
#include "ggl/error.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0));
}

inline Bytes encode_image(const Tensor& image) {
  const Shape& s = image.shape();
  require(s.size() == 3 && (s[0] == 1 || s[0] == 3), ErrorCode::shape_mismatch,
          "images must be (1|3, height, width), got " + shape_string(s));
  const std::size_t c = s[0], h = s[1], w = s[2];
  const std::string header =
      std::string(c == 1 ? "P5" : "P6") + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(header.size() + image.size());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch) out.push_back(to_byte(image[(ch * h + i) * w + j]));
  return out;
}

inline Tensor decode_image(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    require(pos < bytes.size() && std::isdigit(bytes[pos]), ErrorCode::invalid_argument,
            "malformed image header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      require(v < 100000, ErrorCode::invalid_argument, "image dimension too large");
    }
    return v;
  };
  require(bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'),
          ErrorCode::bad_magic, "not a binary PGM/PPM image");
  const std::size_t c = bytes[1] == '5' ? 1 : 3;
  pos = 2;
  const std::size_t w = number();
  const std::size_t h = number();
  const std::size_t maxval = number();
  require(maxval == 255, ErrorCode::invalid_argument, "only maxval 255 is supported");
  require(w > 0 && h > 0, ErrorCode::shape_mismatch, "image has zero extent");
  require(pos < bytes.size() && std::isspace(bytes[pos]), ErrorCode::invalid_argument,
          "malformed image header");
  ++pos;
  require(bytes.size() - pos >= c * h * w, ErrorCode::truncated, "unexpected end of image data");
  Tensor image({c, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t ch = 0; ch < c; ++ch)
        image[(ch * h + i) * w + j] = static_cast<double>(bytes[pos++]) / 255.0;
  return image;
}

}  // namespace ggl
