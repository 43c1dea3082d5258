#pragma once

// Binary tensor container shared by weight files ("GGLW") and gradient
// shares ("GGLG"). Layout, all little-endian:
//
//   magic[4] | u32 version (=1) | u32 tensor count
//   per tensor: u32 name length | name (UTF-8) | u32 ndim | ndim x u32 dims |
//               f64 data, row-major
//   u64 FNV-1a checksum of every preceding byte

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ggl/error.hpp"
#include "ggl/nn.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

using Bytes = std::vector<std::uint8_t>;
using Magic = std::array<char, 4>;

inline constexpr Magic kWeightMagic{'G', 'G', 'L', 'W'};
inline constexpr Magic kGradientMagic{'G', 'G', 'L', 'G'};
inline constexpr std::uint32_t kContainerVersion = 1;

constexpr std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return out;
}

struct ContainerEntry {
  std::string name;
  Tensor tensor;

  friend bool operator==(const ContainerEntry&, const ContainerEntry&) = default;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  Bytes take() { return std::move(out_); }
  const Bytes& bytes() const { return out_; }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  void raw(void* p, std::size_t n) {
    require(n <= in_.size() - pos_, ErrorCode::truncated, "unexpected end of container");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

inline std::string magic_error(const Magic& magic) {
  if (magic == kGradientMagic) return "not a gradient container";
  if (magic == kWeightMagic) return "not a weight container";
  return "bad container magic";
}

}  // namespace detail

inline Bytes encode_container(const Magic& magic, std::span<const ContainerEntry> entries) {
  detail::ByteWriter w;
  w.raw(magic.data(), magic.size());
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.raw(e.name.data(), e.name.size());
    w.u32(static_cast<std::uint32_t>(e.tensor.shape().size()));
    for (std::size_t d : e.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : e.tensor.data()) w.f64(v);
  }
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

inline std::vector<ContainerEntry> decode_container(const Magic& magic,
                                                    std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  Magic got{};
  if (bytes.size() >= got.size()) {
    r.raw(got.data(), got.size());
    require(got == magic, ErrorCode::bad_magic, detail::magic_error(magic));
  } else {
    // Too short to hold a magic; report as truncated only if the prefix matches.
    require(std::memcmp(bytes.data(), magic.data(), bytes.size()) == 0, ErrorCode::bad_magic,
            detail::magic_error(magic));
    fail(ErrorCode::truncated, "unexpected end of container");
  }
  const std::uint32_t version = r.u32();
  require(version == kContainerVersion, ErrorCode::bad_version,
          "unsupported container version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  std::vector<ContainerEntry> entries;
  for (std::uint32_t t = 0; t < count; ++t) {
    ContainerEntry e;
    const std::uint32_t name_len = r.u32();
    require(name_len <= r.remaining(), ErrorCode::truncated, "unexpected end of container");
    e.name.resize(name_len);
    r.raw(e.name.data(), name_len);
    const std::uint32_t ndim = r.u32();
    require(ndim >= 1 && ndim <= 8, ErrorCode::shape_mismatch,
            "shape mismatch: tensor '" + e.name + "' has " + std::to_string(ndim) + " dims");
    Shape shape(ndim);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = r.u32();
      require(d > 0, ErrorCode::shape_mismatch, "shape mismatch: zero extent in '" + e.name + "'");
      n *= d;
      require(n * 8 <= r.remaining(), ErrorCode::truncated, "unexpected end of container");
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) v = r.f64();
    e.tensor = Tensor(std::move(shape), std::move(data));
    entries.push_back(std::move(e));
  }
  const std::size_t body = r.position();
  std::uint64_t stored = 0;
  r.raw(&stored, sizeof stored);
  require(r.remaining() == 0, ErrorCode::invalid_argument, "trailing bytes after container");
  require(stored == fnv1a64(bytes.first(body)), ErrorCode::checksum_mismatch,
          "container checksum mismatch");
  for (const auto& e : entries)
    require(e.tensor.all_finite(), ErrorCode::non_finite,
            "non-finite value in tensor '" + e.name + "'");
  return entries;
}

// Networks are stored as a GGLW container: "__input_shape__", "__classes__",
// "__layers__" (rows of kind, in, out, kernel_h, kernel_w, stride, padding),
// then every parameter under "<layer>.<param>".
inline Bytes encode_network(const Network& net) {
  std::vector<ContainerEntry> entries;
  std::vector<double> in(net.input_shape().begin(), net.input_shape().end());
  entries.push_back({"__input_shape__", Tensor::vector(std::move(in))});
  entries.push_back({"__classes__", Tensor::vector({static_cast<double>(net.class_count())})});
  std::vector<double> rows;
  for (const auto& l : net.layers()) {
    for (double v : {static_cast<double>(l.kind), static_cast<double>(l.in),
                     static_cast<double>(l.out), static_cast<double>(l.kernel_h),
                     static_cast<double>(l.kernel_w), static_cast<double>(l.stride),
                     static_cast<double>(l.padding)})
      rows.push_back(v);
  }
  entries.push_back({"__layers__", Tensor({net.layers().size(), 7}, std::move(rows))});
  for (const auto& p : net.params()) entries.push_back({p.key(), p.value});
  return encode_container(kWeightMagic, entries);
}

namespace detail {

inline std::size_t as_count(double v, const std::string& what) {
  require(v >= 0.0 && v == std::floor(v) && v < 1e9, ErrorCode::shape_mismatch,
          "shape mismatch: bad " + what);
  return static_cast<std::size_t>(v);
}

inline const ContainerEntry& find_entry(const std::vector<ContainerEntry>& entries,
                                        std::string_view name) {
  for (const auto& e : entries)
    if (e.name == name) return e;
  fail(ErrorCode::shape_mismatch, "shape mismatch: container lacks '" + std::string(name) + "'");
}

}  // namespace detail

inline Network decode_network(std::span<const std::uint8_t> bytes) {
  const auto entries = decode_container(kWeightMagic, bytes);
  const auto& in = detail::find_entry(entries, "__input_shape__").tensor;
  const auto& classes = detail::find_entry(entries, "__classes__").tensor;
  const auto& rows = detail::find_entry(entries, "__layers__").tensor;
  require(rows.shape().size() == 2 && rows.shape()[1] == 7 && classes.size() == 1,
          ErrorCode::shape_mismatch, "shape mismatch: malformed network header");
  Shape input_shape;
  for (double v : in.data()) input_shape.push_back(detail::as_count(v, "input shape"));
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < rows.shape()[0]; ++i) {
    const double* r = rows.data().data() + i * 7;
    const std::size_t kind = detail::as_count(r[0], "layer kind");
    require(kind <= static_cast<std::size_t>(LayerKind::flatten), ErrorCode::shape_mismatch,
            "shape mismatch: unknown layer kind");
    layers.push_back({static_cast<LayerKind>(kind), detail::as_count(r[1], "layer field"),
                      detail::as_count(r[2], "layer field"), detail::as_count(r[3], "layer field"),
                      detail::as_count(r[4], "layer field"), detail::as_count(r[5], "layer field"),
                      detail::as_count(r[6], "layer field")});
  }
  std::vector<NamedTensor> params;
  for (const auto& e : entries) {
    if (e.name.starts_with("__")) continue;
    const auto dot_pos = e.name.rfind('.');
    require(dot_pos != std::string::npos, ErrorCode::shape_mismatch,
            "shape mismatch: unexpected tensor '" + e.name + "'");
    params.push_back({e.name.substr(0, dot_pos), e.name.substr(dot_pos + 1), e.tensor});
  }
  return Network(std::move(input_shape), std::move(layers),
                 detail::as_count(classes[0], "class count"), std::move(params));
}

// Content hash of the serialized weights; shares reference models by it.
inline std::string model_id(const Network& net) {
  return "fnv1a64:" + hex64(fnv1a64(encode_network(net)));
}

}  // namespace ggl
