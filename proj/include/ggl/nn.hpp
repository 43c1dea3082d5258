#pragma once

// Fixed-architecture networks with hand-written backpropagation.
//
// A Network is an ordered stack of Dense / Conv2d / ReLU / Sigmoid / Flatten
// layers evaluated on a single example (batch size 1). The last parametric
// layer is the Dense classification layer; its input is the representation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ggl/error.hpp"
#include "ggl/tensor.hpp"

namespace ggl {

enum class LayerKind { dense, conv2d, relu, sigmoid, flatten };

constexpr const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // Dense: in/out widths. Conv2d: in/out channels.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out, 0, 0, 1, 0};
  }
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel_h, std::size_t kernel_w,
                          std::size_t stride = 1, std::size_t padding = 0) {
    return {LayerKind::conv2d, in_channels, out_channels, kernel_h, kernel_w, stride, padding};
  }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }

  bool parametric() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NamedTensor {
  std::string layer;
  std::string param;
  Tensor value;

  std::string key() const { return layer + "." + param; }

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Per-parameter gradients in the network's parameter order.
struct GradientVector {
  std::vector<NamedTensor> entries;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.value.size();
    return n;
  }

  std::vector<double> flatten_concat() const {
    std::vector<double> flat;
    flat.reserve(total_size());
    for (const auto& e : entries)
      flat.insert(flat.end(), e.value.values().begin(), e.value.values().end());
    return flat;
  }

  std::optional<std::size_t> index_of(const std::string& layer, const std::string& param) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].layer == layer && entries[i].param == param) return i;
    return std::nullopt;
  }

  bool same_layout(const GradientVector& other) const {
    if (entries.size() != other.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].layer != other.entries[i].layer ||
          entries[i].param != other.entries[i].param ||
          entries[i].value.shape() != other.entries[i].value.shape())
        return false;
    }
    return true;
  }

  friend bool operator==(const GradientVector&, const GradientVector&) = default;
};

class Network {
 public:
  Network() = default;

  Network(Shape input_shape, std::vector<LayerSpec> layers, std::size_t class_count,
          std::vector<NamedTensor> params)
      : input_shape_(std::move(input_shape)),
        layers_(std::move(layers)),
        class_count_(class_count),
        params_(std::move(params)) {
    validate();
  }

  // Weights and biases uniform in [-a, a], a = sqrt(1 / fan_in).
  static Network initialized(Shape input_shape, std::vector<LayerSpec> layers,
                             std::size_t class_count, std::uint64_t seed) {
    Network shell;
    shell.input_shape_ = std::move(input_shape);
    shell.layers_ = std::move(layers);
    shell.class_count_ = class_count;
    shell.compute_shapes();
    RandomSource rng(seed);
    std::vector<NamedTensor> params;
    for (std::size_t i = 0; i < shell.layers_.size(); ++i) {
      const LayerSpec& l = shell.layers_[i];
      if (!l.parametric()) continue;
      const auto [wshape, bshape, fan_in] = param_shapes(l);
      const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
      params.push_back({shell.names_[i], "weight", uniform_sample(rng, wshape, -a, a)});
      params.push_back({shell.names_[i], "bias", uniform_sample(rng, bshape, -a, a)});
    }
    return Network(shell.input_shape_, shell.layers_, class_count, std::move(params));
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  std::size_t input_size() const { return shape_size(input_shape_); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<NamedTensor>& params() const noexcept { return params_; }

  const std::string& layer_name(std::size_t i) const { return names_.at(i); }
  // Shape of the input to layer i; index layers().size() is the logits shape.
  const Shape& activation_shape(std::size_t i) const { return shapes_.at(i); }

  std::optional<std::size_t> layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    return std::nullopt;
  }

  std::size_t final_dense_index() const { return final_dense_; }

  // Index in params() of layer i's weight (bias follows directly).
  std::size_t weight_slot(std::size_t layer) const { return slots_.at(layer); }

  // True when the representation is the output of a ReLU or Sigmoid, possibly
  // followed by Flatten, so that it is elementwise non-negative.
  bool representation_nonnegative() const {
    for (std::size_t i = final_dense_; i-- > 0;) {
      if (layers_[i].kind == LayerKind::flatten) continue;
      return layers_[i].kind == LayerKind::relu || layers_[i].kind == LayerKind::sigmoid;
    }
    return false;
  }

  GradientVector zero_gradients() const {
    GradientVector g;
    g.entries.reserve(params_.size());
    for (const auto& p : params_) g.entries.push_back({p.layer, p.param, Tensor(p.value.shape())});
    return g;
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_ &&
           a.class_count_ == b.class_count_ && a.params_ == b.params_;
  }

  struct ParamShapes {
    Shape weight;
    Shape bias;
    std::size_t fan_in;
  };

  static ParamShapes param_shapes(const LayerSpec& l) {
    if (l.kind == LayerKind::dense) return {{l.out, l.in}, {l.out}, l.in};
    return {{l.out, l.in, l.kernel_h, l.kernel_w}, {l.out}, l.in * l.kernel_h * l.kernel_w};
  }

 private:
  void compute_shapes() {
    require(!layers_.empty(), ErrorCode::invalid_argument, "network has no layers");
    require(class_count_ >= 2, ErrorCode::invalid_argument, "class_count must be at least 2");
    require(!input_shape_.empty(), ErrorCode::shape_mismatch, "empty input shape");
    for (auto e : input_shape_)
      require(e > 0, ErrorCode::shape_mismatch, "input extents must be positive");
    shapes_.assign(1, input_shape_);
    names_.clear();
    slots_.assign(layers_.size(), 0);
    std::size_t dense_count = 0, conv_count = 0, act_count = 0;
    std::optional<std::size_t> last_parametric;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      const Shape& in = shapes_.back();
      const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
      Shape out;
      switch (l.kind) {
        case LayerKind::dense:
          require(shape_size(in) == l.in && l.in > 0 && l.out > 0, ErrorCode::shape_mismatch,
                  "shape mismatch at " + where + ": input " + shape_string(in) +
                      " does not provide " + std::to_string(l.in) + " features");
          out = {l.out};
          names_.push_back("fc" + std::to_string(++dense_count));
          last_parametric = i;
          break;
        case LayerKind::conv2d: {
          require(in.size() == 3 && in[0] == l.in && l.out > 0 && l.kernel_h > 0 &&
                      l.kernel_w > 0 && l.stride > 0,
                  ErrorCode::shape_mismatch,
                  "shape mismatch at " + where + ": input " + shape_string(in));
          require(in[1] + 2 * l.padding >= l.kernel_h && in[2] + 2 * l.padding >= l.kernel_w,
                  ErrorCode::shape_mismatch, "kernel larger than padded input at " + where);
          const std::size_t oh = (in[1] + 2 * l.padding - l.kernel_h) / l.stride + 1;
          const std::size_t ow = (in[2] + 2 * l.padding - l.kernel_w) / l.stride + 1;
          out = {l.out, oh, ow};
          names_.push_back("conv" + std::to_string(++conv_count));
          last_parametric = i;
          break;
        }
        case LayerKind::relu:
        case LayerKind::sigmoid:
          out = in;
          names_.push_back(std::string(to_string(l.kind)) + std::to_string(++act_count));
          break;
        case LayerKind::flatten:
          out = {shape_size(in)};
          names_.push_back("flatten" + std::to_string(++act_count));
          break;
      }
      shapes_.push_back(std::move(out));
    }
    require(last_parametric && layers_[*last_parametric].kind == LayerKind::dense,
            ErrorCode::invalid_argument, "the final parametric layer must be Dense");
    require(*last_parametric + 1 == layers_.size(), ErrorCode::invalid_argument,
            "the final Dense layer must produce the logits");
    require(layers_[*last_parametric].out == class_count_, ErrorCode::shape_mismatch,
            "final Dense width does not match class_count");
    final_dense_ = *last_parametric;
  }

  void validate() {
    compute_shapes();
    std::size_t slot = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].parametric()) continue;
      const auto shapes = param_shapes(layers_[i]);
      require(slot + 2 <= params_.size(), ErrorCode::shape_mismatch,
              "missing parameters for " + names_[i]);
      const NamedTensor& w = params_[slot];
      const NamedTensor& b = params_[slot + 1];
      require(w.layer == names_[i] && w.param == "weight" && b.layer == names_[i] &&
                  b.param == "bias",
              ErrorCode::shape_mismatch, "parameter order does not match layer " + names_[i]);
      require(w.value.shape() == shapes.weight, ErrorCode::shape_mismatch,
              "shape mismatch: " + w.key() + " is " + shape_string(w.value.shape()) +
                  ", expected " + shape_string(shapes.weight));
      require(b.value.shape() == shapes.bias, ErrorCode::shape_mismatch,
              "shape mismatch: " + b.key() + " is " + shape_string(b.value.shape()) +
                  ", expected " + shape_string(shapes.bias));
      slots_[i] = slot;
      slot += 2;
    }
    require(slot == params_.size(), ErrorCode::shape_mismatch, "unexpected extra parameters");
  }

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::size_t class_count_ = 0;
  std::vector<NamedTensor> params_;
  std::vector<Shape> shapes_;
  std::vector<std::string> names_;
  std::vector<std::size_t> slots_;
  std::size_t final_dense_ = 0;
};

namespace presets {

// Dense(d -> 64) - ReLU - Dense(64 -> n)
inline Network mlp_small(const Shape& input_shape, std::size_t classes, std::uint64_t seed) {
  const std::size_t d = shape_size(input_shape);
  return Network::initialized(input_shape,
                              {LayerSpec::dense(d, 64), LayerSpec::relu(),
                               LayerSpec::dense(64, classes)},
                              classes, seed);
}

// Conv(c -> 8, 3x3, s1, p1) - ReLU - Conv(8 -> 16, 3x3, s2, p1) - ReLU - Flatten - Dense(-> n)
inline Network cnn_small(const Shape& input_shape, std::size_t classes, std::uint64_t seed) {
  require(input_shape.size() == 3, ErrorCode::shape_mismatch,
          "cnn-small needs a (channels, height, width) input");
  const std::size_t h2 = (input_shape[1] + 2 - 3) / 2 + 1;
  const std::size_t w2 = (input_shape[2] + 2 - 3) / 2 + 1;
  return Network::initialized(
      input_shape,
      {LayerSpec::conv2d(input_shape[0], 8, 3, 3, 1, 1), LayerSpec::relu(),
       LayerSpec::conv2d(8, 16, 3, 3, 2, 1), LayerSpec::relu(), LayerSpec::flatten(),
       LayerSpec::dense(16 * h2 * w2, classes)},
      classes, seed);
}

inline Network by_name(const std::string& name, const Shape& input_shape, std::size_t classes,
                       std::uint64_t seed) {
  if (name == "mlp-small") return mlp_small(input_shape, classes, seed);
  if (name == "cnn-small") return cnn_small(input_shape, classes, seed);
  fail(ErrorCode::invalid_argument, "unknown model preset '" + name + "'");
}

}  // namespace presets

// acts[i] is the input of layer i; acts.back() holds the logits.
struct ForwardCache {
  std::vector<std::vector<double>> acts;
};

struct ForwardResult {
  Tensor logits;
  Tensor representation;
  ForwardCache cache;
};

namespace detail {

inline void dense_forward(const LayerSpec& l, std::span<const double> w, std::span<const double> b,
                          std::span<const double> x, std::vector<double>& y) {
  y.assign(l.out, 0.0);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* row = w.data() + o * l.in;
    double acc = b[o];
    for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

inline void conv_forward(const LayerSpec& l, const Shape& in, const Shape& out,
                         std::span<const double> w, std::span<const double> b,
                         std::span<const double> x, std::vector<double>& y) {
  const std::size_t H = in[1], W = in[2], OH = out[1], OW = out[2];
  const std::size_t kh = l.kernel_h, kw = l.kernel_w;
  y.assign(l.out * OH * OW, 0.0);
  for (std::size_t o = 0; o < l.out; ++o)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = b[o];
        for (std::size_t c = 0; c < l.in; ++c)
          for (std::size_t a = 0; a < kh; ++a) {
            const auto r = static_cast<std::ptrdiff_t>(i * l.stride + a) -
                           static_cast<std::ptrdiff_t>(l.padding);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t bb = 0; bb < kw; ++bb) {
              const auto s = static_cast<std::ptrdiff_t>(j * l.stride + bb) -
                             static_cast<std::ptrdiff_t>(l.padding);
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(W)) continue;
              acc += w[((o * l.in + c) * kh + a) * kw + bb] * x[(c * H + r) * W + s];
            }
          }
        y[(o * OH + i) * OW + j] = acc;
      }
}

// grad_in may be null when the input gradient is not needed.
inline void conv_backward(const LayerSpec& l, const Shape& in, const Shape& out,
                          std::span<const double> w, std::span<const double> x,
                          std::span<const double> g, double* grad_w, double* grad_b,
                          std::vector<double>* grad_in) {
  const std::size_t H = in[1], W = in[2], OH = out[1], OW = out[2];
  const std::size_t kh = l.kernel_h, kw = l.kernel_w;
  if (grad_in) grad_in->assign(l.in * H * W, 0.0);
  for (std::size_t o = 0; o < l.out; ++o)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        const double go = g[(o * OH + i) * OW + j];
        if (grad_b) grad_b[o] += go;
        for (std::size_t c = 0; c < l.in; ++c)
          for (std::size_t a = 0; a < kh; ++a) {
            const auto r = static_cast<std::ptrdiff_t>(i * l.stride + a) -
                           static_cast<std::ptrdiff_t>(l.padding);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t bb = 0; bb < kw; ++bb) {
              const auto s = static_cast<std::ptrdiff_t>(j * l.stride + bb) -
                             static_cast<std::ptrdiff_t>(l.padding);
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(W)) continue;
              const std::size_t wi = ((o * l.in + c) * kh + a) * kw + bb;
              const std::size_t xi = (c * H + r) * W + s;
              if (grad_w) grad_w[wi] += go * x[xi];
              if (grad_in) (*grad_in)[xi] += go * w[wi];
            }
          }
      }
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace detail

// Runs layers [0, end_layer) and returns the full cache.
inline ForwardCache forward_cache(const Network& net, std::span<const double> x,
                                  std::size_t end_layer) {
  require(x.size() == net.input_size(), ErrorCode::shape_mismatch,
          "shape mismatch: input has " + std::to_string(x.size()) + " values, network expects " +
              shape_string(net.input_shape()));
  ForwardCache cache;
  cache.acts.reserve(end_layer + 1);
  cache.acts.emplace_back(x.begin(), x.end());
  const auto& layers = net.layers();
  const auto& params = net.params();
  for (std::size_t i = 0; i < end_layer; ++i) {
    const LayerSpec& l = layers[i];
    const std::vector<double>& in = cache.acts.back();
    std::vector<double> out;
    switch (l.kind) {
      case LayerKind::dense: {
        const std::size_t s = net.weight_slot(i);
        detail::dense_forward(l, params[s].value.data(), params[s + 1].value.data(), in, out);
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t s = net.weight_slot(i);
        detail::conv_forward(l, net.activation_shape(i), net.activation_shape(i + 1),
                             params[s].value.data(), params[s + 1].value.data(), in, out);
        break;
      }
      case LayerKind::relu:
        out = in;
        for (double& v : out) v = v > 0.0 ? v : 0.0;
        break;
      case LayerKind::sigmoid:
        out = in;
        for (double& v : out) v = detail::sigmoid(v);
        break;
      case LayerKind::flatten:
        out = in;
        break;
    }
    cache.acts.push_back(std::move(out));
  }
  return cache;
}

inline ForwardResult forward(const Network& net, const Tensor& x) {
  ForwardCache cache = forward_cache(net, x.data(), net.layers().size());
  const std::size_t r = net.final_dense_index();
  Tensor representation = Tensor::vector(cache.acts[r]);
  Tensor logits = Tensor::vector(cache.acts.back());
  return {std::move(logits), std::move(representation), std::move(cache)};
}

// Back-propagates `grad` (the gradient w.r.t. the input of layer end_layer)
// down to the network input. Parameter gradients are accumulated into
// `param_grads` when given. Returns the input gradient when requested.
inline std::vector<double> backward(const Network& net, const ForwardCache& cache,
                                    std::size_t end_layer, std::vector<double> grad,
                                    GradientVector* param_grads, bool need_input_grad) {
  const auto& layers = net.layers();
  const auto& params = net.params();
  for (std::size_t i = end_layer; i-- > 0;) {
    const LayerSpec& l = layers[i];
    const std::vector<double>& in = cache.acts[i];
    const bool want_in = need_input_grad || i > 0;
    switch (l.kind) {
      case LayerKind::dense: {
        const std::size_t s = net.weight_slot(i);
        if (param_grads) {
          double* gw = param_grads->entries[s].value.data().data();
          double* gb = param_grads->entries[s + 1].value.data().data();
          for (std::size_t o = 0; o < l.out; ++o) {
            gb[o] += grad[o];
            double* row = gw + o * l.in;
            for (std::size_t k = 0; k < l.in; ++k) row[k] += grad[o] * in[k];
          }
        }
        if (want_in) {
          std::vector<double> gin(l.in, 0.0);
          const double* w = params[s].value.data().data();
          for (std::size_t o = 0; o < l.out; ++o) {
            const double go = grad[o];
            if (go == 0.0) continue;
            const double* row = w + o * l.in;
            for (std::size_t k = 0; k < l.in; ++k) gin[k] += go * row[k];
          }
          grad = std::move(gin);
        }
        break;
      }
      case LayerKind::conv2d: {
        const std::size_t s = net.weight_slot(i);
        double* gw = param_grads ? param_grads->entries[s].value.data().data() : nullptr;
        double* gb = param_grads ? param_grads->entries[s + 1].value.data().data() : nullptr;
        std::vector<double> gin;
        detail::conv_backward(l, net.activation_shape(i), net.activation_shape(i + 1),
                              params[s].value.data(), in, grad, gw, gb, want_in ? &gin : nullptr);
        if (want_in) grad = std::move(gin);
        break;
      }
      case LayerKind::relu:
        // Subgradient at 0 is 0.
        for (std::size_t k = 0; k < grad.size(); ++k)
          if (!(in[k] > 0.0)) grad[k] = 0.0;
        break;
      case LayerKind::sigmoid: {
        const std::vector<double>& out = cache.acts[i + 1];
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= out[k] * (1.0 - out[k]);
        break;
      }
      case LayerKind::flatten:
        break;
    }
    if (i == 0 && !need_input_grad) return {};
  }
  return grad;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::empty_input, "empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i] = std::exp(logits[i] - m);
  for (double& v : p) v /= sum;
  return p;
}

inline double cross_entropy_loss(const Tensor& logits, std::size_t label) {
  require(label < logits.size(), ErrorCode::invalid_argument,
          "class index " + std::to_string(label) + " out of range");
  const auto z = logits.data();
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return std::log(sum) + m - z[label];
}

// F(x) = d/dtheta CE(f_theta(x), c)
inline GradientVector param_gradients(const Network& net, const Tensor& x, std::size_t label) {
  require(label < net.class_count(), ErrorCode::invalid_argument,
          "class index " + std::to_string(label) + " out of range");
  ForwardCache cache = forward_cache(net, x.data(), net.layers().size());
  std::vector<double> grad = softmax(cache.acts.back());
  grad[label] -= 1.0;
  GradientVector grads = net.zero_gradients();
  backward(net, cache, net.layers().size(), std::move(grad), &grads, false);
  return grads;
}

// Row i is d(input of `layer`)_i / dx, flattened over x. Shape (l, d).
inline Tensor layer_input_jacobian(const Network& net, const Tensor& x, std::size_t layer) {
  require(layer < net.layers().size(), ErrorCode::invalid_argument, "layer index out of range");
  ForwardCache cache = forward_cache(net, x.data(), layer);
  const std::size_t l = cache.acts.back().size();
  const std::size_t d = net.input_size();
  Tensor jac({l, d});
  for (std::size_t i = 0; i < l; ++i) {
    std::vector<double> seed(l, 0.0);
    seed[i] = 1.0;
    const std::vector<double> row = backward(net, cache, layer, std::move(seed), nullptr, true);
    std::copy(row.begin(), row.end(), jac.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return jac;
}

inline Tensor representation_input_jacobian(const Network& net, const Tensor& x) {
  return layer_input_jacobian(net, x, net.final_dense_index());
}

}  // namespace ggl
