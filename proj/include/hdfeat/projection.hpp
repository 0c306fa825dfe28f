#pragma once

// Context-gated MLP projection from fused visual features to the language-model width.
//
//   gate:  y   = sigmoid(x W_g^T + b_g) * x          (per token, elementwise product)
//   mlp:   out = relu(y W1 + b1) W2 + b2
//
// Everything is templated on the scalar type: float is the production path, double is the
// check mode used by the gradient tests. All reductions accumulate in double in a fixed order.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "hdfeat/encoders.hpp"
#include "hdfeat/error.hpp"
#include "hdfeat/hdft.hpp"
#include "hdfeat/tensor.hpp"

namespace hdfeat {

template <typename T>
struct GatingProjectionT {
  BasicTensor<T> w_gate;  // [d x d]; row j produces gate pre-activation j
  BasicTensor<T> b_gate;  // [d]
  BasicTensor<T> w1;      // [d x h]
  BasicTensor<T> b1;      // [h]
  BasicTensor<T> w2;      // [h x o]
  BasicTensor<T> b2;      // [o]

  std::size_t in_dim() const { return w_gate.dim(0); }
  std::size_t hidden_dim() const { return w1.dim(1); }
  std::size_t out_dim() const { return w2.dim(1); }

  void validate() const {
    auto fail = [&](const char* what) {
      throw Error(ErrorKind::kShape, std::string("GatingProjection: ") + what + " (W_g " + shape_str(w_gate.shape()) +
                                         ", b_g " + shape_str(b_gate.shape()) + ", W1 " + shape_str(w1.shape()) +
                                         ", b1 " + shape_str(b1.shape()) + ", W2 " + shape_str(w2.shape()) +
                                         ", b2 " + shape_str(b2.shape()) + ")");
    };
    if (w_gate.rank() != 2 || w1.rank() != 2 || w2.rank() != 2) fail("weight matrices must be rank 2");
    if (b_gate.rank() != 1 || b1.rank() != 1 || b2.rank() != 1) fail("biases must be rank 1");
    const std::size_t d = w_gate.dim(0);
    if (w_gate.dim(1) != d || b_gate.dim(0) != d || w1.dim(0) != d) fail("gate width mismatch");
    if (b1.dim(0) != w1.dim(1) || w2.dim(0) != w1.dim(1)) fail("hidden width mismatch");
    if (b2.dim(0) != w2.dim(1)) fail("output width mismatch");
  }

  template <typename U>
  GatingProjectionT<U> cast() const {
    return {w_gate.template cast<U>(), b_gate.template cast<U>(), w1.template cast<U>(),
            b1.template cast<U>(),     w2.template cast<U>(),     b2.template cast<U>()};
  }

  // Weights ~ N(0, 1/fan_in) from the seeded normal stream, biases zero.
  static GatingProjectionT init(std::size_t d, std::size_t h, std::size_t o, std::uint64_t seed) {
    if (d == 0 || h == 0 || o == 0) throw Error(ErrorKind::kShape, "GatingProjection dimensions must be >= 1");
    NormalStream normals(seed);
    auto fill = [&](Shape shape, std::size_t fan_in) {
      BasicTensor<T> t(std::move(shape));
      const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.data()) v = static_cast<T>(normals.next() * scale);
      return t;
    };
    GatingProjectionT p;
    p.w_gate = fill({d, d}, d);
    p.b_gate = BasicTensor<T>({d});
    p.w1 = fill({d, h}, d);
    p.b1 = BasicTensor<T>({h});
    p.w2 = fill({h, o}, h);
    p.b2 = BasicTensor<T>({o});
    return p;
  }

  // Identifies a parameter set so backward can reject caches from other parameters.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const BasicTensor<T>& t) {
      for (auto d : t.shape()) {
        h ^= d;
        h *= 0x100000001b3ull;
      }
      const auto* bytes = reinterpret_cast<const unsigned char*>(t.data().data());
      for (std::size_t i = 0; i < t.size() * sizeof(T); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
      }
    };
    mix(w_gate), mix(b_gate), mix(w1), mix(b1), mix(w2), mix(b2);
    return h;
  }
};

using GatingProjection = GatingProjectionT<float>;
using GatingProjection64 = GatingProjectionT<double>;

namespace proj_detail {

// out[r][j] = bias[j] + sum_t x[r][t] * w(t, j), t ascending, one rounding.
template <typename T, typename W>
BasicTensor<T> affine(const BasicTensor<T>& x, std::size_t out_w, W&& w, const BasicTensor<T>& bias) {
  const std::size_t n = x.dim(0), k = x.dim(1);
  BasicTensor<T> out({n, out_w});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < out_w; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += static_cast<double>(x.at(r, t)) * static_cast<double>(w(t, j));
      acc += static_cast<double>(bias[j]);
      out.at(r, j) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
void require_width(const BasicTensor<T>& x, std::size_t width, const char* what) {
  detail::require_rank(x, 2, what);
  if (x.dim(1) != width) {
    throw Error(ErrorKind::kShape, std::string(what) + ": input " + shape_str(x.shape()) + " has width " +
                                       std::to_string(x.dim(1)) + ", expected " + std::to_string(width));
  }
}

template <typename T>
void check_cache(bool valid, std::uint64_t fp, const GatingProjectionT<T>& p, const char* what) {
  if (!valid) throw Error(ErrorKind::kCache, std::string(what) + ": missing forward cache");
  if (fp != p.fingerprint()) throw Error(ErrorKind::kCache, std::string(what) + ": stale cache (parameters changed)");
}

}  // namespace proj_detail

template <typename T>
struct GateCache {
  BasicTensor<T> x;
  BasicTensor<T> gate;
  std::uint64_t param_fingerprint = 0;
  bool valid = false;
};

template <typename T>
struct GateGrads {
  BasicTensor<T> grad_x;
  BasicTensor<T> grad_w_gate;
  BasicTensor<T> grad_b_gate;
};

template <typename T>
std::pair<BasicTensor<T>, GateCache<T>> context_gate_forward(const BasicTensor<T>& x, const GatingProjectionT<T>& p) {
  p.validate();
  proj_detail::require_width(x, p.in_dim(), "context_gate_forward");
  const auto z = proj_detail::affine(x, p.in_dim(), [&](std::size_t t, std::size_t j) { return p.w_gate.at(j, t); },
                                     p.b_gate);
  auto g = sigmoid(z);
  auto y = hadamard(g, x);
  return {std::move(y), GateCache<T>{x, std::move(g), p.fingerprint(), true}};
}

// With s = grad_y * x * g * (1 - g):
//   grad_x[i]     = grad_y[i] * g[i] + sum_j s[j] W_g[j][i]
//   grad_W_g[j][i] = sum_rows s[j] x[i],   grad_b_g[j] = sum_rows s[j]
template <typename T>
GateGrads<T> context_gate_backward(const BasicTensor<T>& grad_y, const GateCache<T>& cache,
                                   const GatingProjectionT<T>& p) {
  proj_detail::check_cache(cache.valid, cache.param_fingerprint, p, "context_gate_backward");
  detail::require_same_shape(grad_y, cache.x, "context_gate_backward");
  const std::size_t n = cache.x.dim(0), d = cache.x.dim(1);
  std::vector<double> s(n * d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double g = cache.gate.at(r, j);
      s[r * d + j] = static_cast<double>(grad_y.at(r, j)) * cache.x.at(r, j) * g * (1.0 - g);
    }

  GateGrads<T> out{BasicTensor<T>({n, d}), BasicTensor<T>({d, d}), BasicTensor<T>({d})};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      double acc = static_cast<double>(grad_y.at(r, i)) * cache.gate.at(r, i);
      for (std::size_t j = 0; j < d; ++j) acc += s[r * d + j] * p.w_gate.at(j, i);
      out.grad_x.at(r, i) = static_cast<T>(acc);
    }
  for (std::size_t j = 0; j < d; ++j) {
    double bacc = 0.0;
    for (std::size_t r = 0; r < n; ++r) bacc += s[r * d + j];
    out.grad_b_gate[j] = static_cast<T>(bacc);
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += s[r * d + j] * cache.x.at(r, i);
      out.grad_w_gate.at(j, i) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
struct MlpCache {
  BasicTensor<T> y;
  BasicTensor<T> pre_activation;
  std::uint64_t param_fingerprint = 0;
  bool valid = false;
};

template <typename T>
struct MlpGrads {
  BasicTensor<T> grad_y;
  BasicTensor<T> grad_w1;
  BasicTensor<T> grad_b1;
  BasicTensor<T> grad_w2;
  BasicTensor<T> grad_b2;
};

template <typename T>
std::pair<BasicTensor<T>, MlpCache<T>> mlp_forward_cached(const BasicTensor<T>& y, const GatingProjectionT<T>& p) {
  p.validate();
  proj_detail::require_width(y, p.in_dim(), "mlp_forward");
  auto pre = proj_detail::affine(y, p.hidden_dim(), [&](std::size_t t, std::size_t j) { return p.w1.at(t, j); }, p.b1);
  const auto act = relu(pre);
  auto out = proj_detail::affine(act, p.out_dim(), [&](std::size_t t, std::size_t j) { return p.w2.at(t, j); }, p.b2);
  return {std::move(out), MlpCache<T>{y, std::move(pre), p.fingerprint(), true}};
}

template <typename T>
BasicTensor<T> mlp_forward(const BasicTensor<T>& y, const GatingProjectionT<T>& p) {
  return mlp_forward_cached(y, p).first;
}

// Linear -> relu -> linear backprop; the relu subgradient at 0 is taken as 0.
template <typename T>
MlpGrads<T> mlp_backward(const BasicTensor<T>& grad_out, const MlpCache<T>& cache, const GatingProjectionT<T>& p) {
  proj_detail::check_cache(cache.valid, cache.param_fingerprint, p, "mlp_backward");
  detail::require_rank(grad_out, 2, "mlp_backward");
  if (grad_out.dim(0) != cache.y.dim(0) || grad_out.dim(1) != p.out_dim()) {
    throw Error(ErrorKind::kShape, "mlp_backward: grad_out " + shape_str(grad_out.shape()) + " does not match output [" +
                                       std::to_string(cache.y.dim(0)) + "," + std::to_string(p.out_dim()) + "]");
  }
  const auto act = relu(cache.pre_activation);
  auto grad_hidden = matmul(grad_out, transpose(p.w2));
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    if (!(cache.pre_activation[i] > T{0})) grad_hidden[i] = T{0};
  }
  MlpGrads<T> g;
  g.grad_w2 = matmul(transpose(act), grad_out);
  g.grad_b2 = column_sum(grad_out);
  g.grad_w1 = matmul(transpose(cache.y), grad_hidden);
  g.grad_b1 = column_sum(grad_hidden);
  g.grad_y = matmul(grad_hidden, transpose(p.w1));
  return g;
}

// Gate then MLP over [n x d] token rows.
template <typename T>
BasicTensor<T> project_tokens(const BasicTensor<T>& x, const GatingProjectionT<T>& p) {
  return mlp_forward(context_gate_forward(x, p).first, p);
}

// Flattens the feature map row-major into grid_h * grid_w token rows.
inline Tensor project(const FeatureMap& fm, const GatingProjection& p) {
  p.validate();
  if (fm.channels() != p.in_dim()) {
    throw Error(ErrorKind::kShape, "project: feature width " + std::to_string(fm.channels()) +
                                       " != projection input width " + std::to_string(p.in_dim()));
  }
  return project_tokens(fm.tensor().reshaped({fm.tokens(), fm.channels()}), p);
}

inline constexpr const char* kParamNames[6] = {"W_g", "b_g", "W1", "b1", "W2", "b2"};

// One HDFT file per tensor: <dir>/<name>.hdft
inline void save_params(const std::filesystem::path& dir, const GatingProjection& p) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const Tensor* tensors[6] = {&p.w_gate, &p.b_gate, &p.w1, &p.b1, &p.w2, &p.b2};
  for (int i = 0; i < 6; ++i) hdft::save(dir / (std::string(kParamNames[i]) + ".hdft"), *tensors[i]);
}

inline GatingProjection load_params(const std::filesystem::path& dir) {
  GatingProjection p;
  Tensor* tensors[6] = {&p.w_gate, &p.b_gate, &p.w1, &p.b1, &p.w2, &p.b2};
  for (int i = 0; i < 6; ++i) *tensors[i] = hdft::load(dir / (std::string(kParamNames[i]) + ".hdft"));
  p.validate();
  return p;
}

}  // namespace hdfeat
