#pragma once

// Independent extended-precision reference for gradient checks. The forward
// pass is re-implemented with naive loops in long double so that central
// differences carry far less rounding noise than a double-precision probe.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ggl/nn.hpp"

namespace ggl::verify {

using Real = long double;
using RealVec = std::vector<Real>;

struct RealParams {
  std::vector<RealVec> values;  // same order as Network::params()
};

inline RealParams real_params(const Network& net) {
  RealParams p;
  for (const auto& t : net.params()) p.values.emplace_back(t.value.data().begin(), t.value.data().end());
  return p;
}

struct RealTrace {
  std::vector<RealVec> acts;  // acts[i] = input of layer i
  Real min_kink = std::numeric_limits<Real>::infinity();  // smallest |pre-ReLU|
};

inline RealTrace real_forward(const Network& net, const RealParams& p, const RealVec& x,
                              std::size_t end_layer) {
  RealTrace t;
  t.acts.push_back(x);
  std::size_t slot = 0;
  for (std::size_t li = 0; li < end_layer; ++li) {
    const LayerSpec& l = net.layers()[li];
    const RealVec& in = t.acts.back();
    RealVec out;
    if (l.kind == LayerKind::dense) {
      const RealVec& w = p.values[slot];
      const RealVec& b = p.values[slot + 1];
      slot += 2;
      out.resize(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        Real s = b[o];
        for (std::size_t i = 0; i < l.in; ++i) s += w[o * l.in + i] * in[i];
        out[o] = s;
      }
    } else if (l.kind == LayerKind::conv2d) {
      const RealVec& w = p.values[slot];
      const RealVec& b = p.values[slot + 1];
      slot += 2;
      const Shape& is = net.activation_shape(li);
      const Shape& os = net.activation_shape(li + 1);
      const long H = static_cast<long>(is[1]), W = static_cast<long>(is[2]);
      out.assign(os[0] * os[1] * os[2], 0.0L);
      for (std::size_t o = 0; o < os[0]; ++o)
        for (std::size_t r = 0; r < os[1]; ++r)
          for (std::size_t c = 0; c < os[2]; ++c) {
            Real s = b[o];
            for (std::size_t ci = 0; ci < l.in; ++ci)
              for (std::size_t a = 0; a < l.kernel_h; ++a)
                for (std::size_t bb = 0; bb < l.kernel_w; ++bb) {
                  const long y = static_cast<long>(r * l.stride + a) - static_cast<long>(l.padding);
                  const long xx = static_cast<long>(c * l.stride + bb) - static_cast<long>(l.padding);
                  if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
                  s += w[((o * l.in + ci) * l.kernel_h + a) * l.kernel_w + bb] *
                       in[(ci * is[1] + static_cast<std::size_t>(y)) * is[2] + static_cast<std::size_t>(xx)];
                }
            out[(o * os[1] + r) * os[2] + c] = s;
          }
    } else if (l.kind == LayerKind::relu) {
      out = in;
      for (Real& v : out) {
        t.min_kink = std::min(t.min_kink, std::fabs(v));
        v = v > 0 ? v : 0;
      }
    } else if (l.kind == LayerKind::sigmoid) {
      out = in;
      for (Real& v : out) v = 1.0L / (1.0L + std::exp(-v));
    } else {
      out = in;
    }
    t.acts.push_back(std::move(out));
  }
  return t;
}

inline Real real_cross_entropy(const RealVec& logits, std::size_t label) {
  Real m = logits[0];
  for (Real v : logits) m = std::max(m, v);
  Real s = 0;
  for (Real v : logits) s += std::exp(v - m);
  return std::log(s) + m - logits[label];
}

inline Real real_loss(const Network& net, const RealParams& p, const RealVec& x, std::size_t label) {
  return real_cross_entropy(real_forward(net, p, x, net.layers().size()).acts.back(), label);
}

// Smallest |pre-activation| at any ReLU; central differences are only
// meaningful when this exceeds the probe step by a clear margin.
inline double kink_margin(const Network& net, const Tensor& x) {
  const RealVec rx(x.data().begin(), x.data().end());
  return static_cast<double>(real_forward(net, real_params(net), rx, net.layers().size()).min_kink);
}

inline GradientVector fd_param_gradients(const Network& net, const Tensor& x, std::size_t label,
                                         double h = 1e-5) {
  RealParams p = real_params(net);
  const RealVec rx(x.data().begin(), x.data().end());
  GradientVector g = net.zero_gradients();
  for (std::size_t t = 0; t < p.values.size(); ++t) {
    for (std::size_t i = 0; i < p.values[t].size(); ++i) {
      const Real saved = p.values[t][i];
      p.values[t][i] = saved + h;
      const Real up = real_loss(net, p, rx, label);
      p.values[t][i] = saved - h;
      const Real down = real_loss(net, p, rx, label);
      p.values[t][i] = saved;
      g.entries[t].value[i] = static_cast<double>((up - down) / (2.0L * h));
    }
  }
  return g;
}

// (l x d) Jacobian of the input of `layer` with respect to the network input.
inline Tensor fd_layer_jacobian(const Network& net, const Tensor& x, std::size_t layer,
                                double h = 1e-5) {
  const RealParams p = real_params(net);
  RealVec rx(x.data().begin(), x.data().end());
  const std::size_t l = real_forward(net, p, rx, layer).acts.back().size();
  const std::size_t d = rx.size();
  Tensor jac({l, d});
  for (std::size_t j = 0; j < d; ++j) {
    const Real saved = rx[j];
    rx[j] = saved + h;
    const RealVec up = real_forward(net, p, rx, layer).acts.back();
    rx[j] = saved - h;
    const RealVec down = real_forward(net, p, rx, layer).acts.back();
    rx[j] = saved;
    for (std::size_t i = 0; i < l; ++i)
      jac[i * d + j] = static_cast<double>((up[i] - down[i]) / (2.0L * h));
  }
  return jac;
}

// |a - b| <= rel * max(|a|, |b|) or |a - b| <= abs_tol.
inline bool close(double a, double b, double rel, double abs_tol) {
  const double diff = std::abs(a - b);
  return diff <= abs_tol || diff <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace ggl::verify
