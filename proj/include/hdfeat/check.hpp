#pragma once

// Verification helpers shared by the self-test command and the test suites: reference
// implementations written as plain nested loops over a different traversal than the
// production kernels, random instance generators, and a central-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "hdfeat/encoders.hpp"
#include "hdfeat/projection.hpp"
#include "hdfeat/tensor.hpp"

namespace hdfeat::check {

template <typename T>
BasicTensor<T> naive_matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += static_cast<double>(a.at(i, t)) * static_cast<double>(b.at(t, j));
      c.at(i, j) = static_cast<T>(acc);
    }
  return c;
}

// Scatters every input element to its destination rather than gathering per output vector.
inline FeatureMap naive_space_to_depth(const FeatureMap& fm, std::size_t block) {
  const std::size_t c = fm.channels();
  FeatureMap out(fm.grid_h() / block, fm.grid_w() / block, c * block * block);
  for (std::size_t y = 0; y < fm.grid_h(); ++y)
    for (std::size_t x = 0; x < fm.grid_w(); ++x)
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t sub = (y % block) * block + (x % block);
        out.at(y / block, x / block, sub * c + k) = fm.at(y, x, k);
      }
  return out;
}

inline FeatureMap naive_avgpool(const FeatureMap& fm, std::size_t k) {
  FeatureMap out(fm.grid_h() / k, fm.grid_w() / k, fm.channels());
  for (std::size_t c = 0; c < fm.channels(); ++c)
    for (std::size_t i = 0; i < out.grid_h(); ++i)
      for (std::size_t j = 0; j < out.grid_w(); ++j) {
        double sum = 0.0;
        for (std::size_t di = 0; di < k; ++di)
          for (std::size_t dj = 0; dj < k; ++dj) sum += fm.at(i * k + di, j * k + dj, c);
        out.at(i, j, c) = static_cast<float>(sum / static_cast<double>(k * k));
      }
  return out;
}

// Mean of every channel over the whole grid, in double.
inline std::vector<double> channel_means(const FeatureMap& fm) {
  std::vector<double> m(fm.channels(), 0.0);
  for (std::size_t i = 0; i < fm.grid_h(); ++i)
    for (std::size_t j = 0; j < fm.grid_w(); ++j)
      for (std::size_t c = 0; c < fm.channels(); ++c) m[c] += fm.at(i, j, c);
  for (auto& v : m) v /= static_cast<double>(fm.tokens());
  return m;
}

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

inline FeatureMap random_feature_map(std::size_t gh, std::size_t gw, std::size_t c, std::mt19937_64& rng) {
  return FeatureMap(random_tensor<float>({gh, gw, c}, rng));
}

template <typename T>
GatingProjectionT<T> random_projection(std::size_t d, std::size_t h, std::size_t o, std::mt19937_64& rng) {
  GatingProjectionT<T> p;
  p.w_gate = random_tensor<T>({d, d}, rng);
  p.b_gate = random_tensor<T>({d}, rng);
  p.w1 = random_tensor<T>({d, h}, rng);
  p.b1 = random_tensor<T>({h}, rng);
  p.w2 = random_tensor<T>({h, o}, rng);
  p.b2 = random_tensor<T>({o}, rng);
  return p;
}

// max |a - n| / max(max |a|, max |n|): relative error in the infinity norm.
template <typename T>
double relative_error(const BasicTensor<T>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(analytic[i]) - numeric[i]));
    scale = std::max({scale, std::abs(static_cast<double>(analytic[i])), std::abs(numeric[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

// Central differences of a scalar loss with respect to every entry of `param`.
template <typename T>
std::vector<double> numeric_gradient(BasicTensor<T>& param, const std::function<double()>& loss, double step) {
  std::vector<double> g(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T saved = param[i];
    param[i] = static_cast<T>(saved + step);
    const double up = loss();
    param[i] = static_cast<T>(saved - step);
    const double down = loss();
    param[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

template <typename T>
double weighted_sum(const BasicTensor<T>& out, const BasicTensor<T>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += static_cast<double>(out[i]) * static_cast<double>(weights[i]);
  return s;
}

struct GradCheckResult {
  double gate_error = 0.0;  // worst of grad_x (gate only), grad_W_g, grad_b_g
  double mlp_error = 0.0;   // worst of grad_y, grad_W1, grad_b1, grad_W2, grad_b2
  bool skipped = false;     // instance too close to a relu kink for finite differences
};

// Checks the gate and the MLP separately against central differences of
// L = sum(r * f(input)) for a random weighting r.
template <typename T>
GradCheckResult gradient_check(std::size_t n, std::size_t d, std::size_t h, std::size_t o, std::mt19937_64& rng,
                               double step, double kink_margin = 0.05) {
  GradCheckResult res;
  auto p = random_projection<T>(d, h, o, rng);
  auto x = random_tensor<T>({n, d}, rng, -2.0, 2.0);
  auto y = random_tensor<T>({n, d}, rng, -2.0, 2.0);

  // Gate: loss over y_gate = gate(x).
  {
    auto r = random_tensor<T>({n, d}, rng);
    auto [out, cache] = context_gate_forward(x, p);
    const auto grads = context_gate_backward(r, cache, p);
    auto loss = [&] { return weighted_sum(context_gate_forward(x, p).first, r); };
    res.gate_error = std::max({relative_error(grads.grad_x, numeric_gradient(x, loss, step)),
                               relative_error(grads.grad_w_gate, numeric_gradient(p.w_gate, loss, step)),
                               relative_error(grads.grad_b_gate, numeric_gradient(p.b_gate, loss, step))});
  }

  // MLP: loss over mlp(y).
  {
    auto r = random_tensor<T>({n, o}, rng);
    auto [out, cache] = mlp_forward_cached(y, p);
    for (auto v : cache.pre_activation.data()) {
      if (std::abs(static_cast<double>(v)) < kink_margin) res.skipped = true;
    }
    if (res.skipped) return res;
    const auto grads = mlp_backward(r, cache, p);
    auto loss = [&] { return weighted_sum(mlp_forward(y, p), r); };
    res.mlp_error = std::max({relative_error(grads.grad_y, numeric_gradient(y, loss, step)),
                              relative_error(grads.grad_w1, numeric_gradient(p.w1, loss, step)),
                              relative_error(grads.grad_b1, numeric_gradient(p.b1, loss, step)),
                              relative_error(grads.grad_w2, numeric_gradient(p.w2, loss, step)),
                              relative_error(grads.grad_b2, numeric_gradient(p.b2, loss, step))});
  }
  return res;
}

}  // namespace hdfeat::check
