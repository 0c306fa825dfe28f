#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "hdfeat/error.hpp"

namespace hdfeat {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// Dense row-major array of rank 1..4. Spatial tensors are channel-last (H x W x C).
// Shape mismatches are always errors; there is no broadcasting.
template <typename T>
class BasicTensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), T{0});
  }

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
      throw Error(ErrorKind::kShape, "data length " + std::to_string(data_.size()) +
                                         " does not match shape " + shape_str(shape_));
    }
  }

  static BasicTensor filled(Shape shape, T value) {
    BasicTensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  T at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  T at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  T& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Same elements, different shape.
  BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }
  BasicTensor reshaped(Shape shape) && { return BasicTensor(std::move(shape), std::move(data_)); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  // Bitwise comparison: distinguishes -0 from +0 and treats identical NaN payloads as equal.
  friend bool bitwise_equal(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ &&
           (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(T)) == 0);
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& s) {
    if (s.empty() || s.size() > 4) {
      throw Error(ErrorKind::kShape, "rank must be 1..4, got " + std::to_string(s.size()));
    }
    for (auto d : s) {
      if (d == 0) throw Error(ErrorKind::kShape, "zero-sized dimension in " + shape_str(s));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

namespace detail {

template <typename T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw Error(ErrorKind::kShape, std::string(what) + " expects rank " + std::to_string(rank) +
                                       ", got " + shape_str(t.shape()));
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T, typename F>
BasicTensor<T> map(const BasicTensor<T>& x, F&& f) {
  BasicTensor<T> out = x;
  for (auto& v : out.data()) v = f(v);
  return out;
}

}  // namespace detail

// c[i][j] = sum_t a[i][t] * b[t][j]. Accumulates in double with t ascending, then rounds
// once to T, so the result is bit-identical to the textbook triple loop.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_rank(a, 2, "matmul lhs");
  detail::require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error(ErrorKind::kShape,
                "matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  BasicTensor<T> c({m, n});
  std::vector<double> acc(n);
  const auto A = a.data();
  const auto B = b.data();
  auto C = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      const double av = A[i * k + t];
      const T* brow = B.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += av * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] = static_cast<T>(acc[j]);
  }
  return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  detail::require_rank(a, 2, "transpose");
  BasicTensor<T> out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

template <typename T>
T sigmoid_scalar(T z) {
  // Branch on sign so exp never overflows.
  if (z >= T{0}) return T{1} / (T{1} + std::exp(-z));
  const T e = std::exp(z);
  return e / (T{1} + e);
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return detail::map(x, [](T v) { return sigmoid_scalar(v); });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return detail::map(x, [](T v) { return v > T{0} ? v : T{0}; });
}

template <typename T>
BasicTensor<T> hadamard(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "hadamard");
  BasicTensor<T> out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] * bd[i];
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  BasicTensor<T> out = a;
  auto o = out.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

// Adds a length-n vector to every row of an [m x n] matrix.
template <typename T>
BasicTensor<T> add_row_vector(const BasicTensor<T>& a, const BasicTensor<T>& row) {
  detail::require_rank(a, 2, "add_row_vector");
  detail::require_rank(row, 1, "add_row_vector bias");
  if (row.dim(0) != a.dim(1)) {
    throw Error(ErrorKind::kShape,
                "row vector " + shape_str(row.shape()) + " does not fit matrix " + shape_str(a.shape()));
  }
  BasicTensor<T> out = a;
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(i, j) += row[j];
  return out;
}

// Column sums of an [m x n] matrix, accumulated in double with rows ascending.
template <typename T>
BasicTensor<T> column_sum(const BasicTensor<T>& a) {
  detail::require_rank(a, 2, "column_sum");
  std::vector<double> acc(a.dim(1), 0.0);
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) acc[j] += a.at(i, j);
  std::vector<T> out(acc.begin(), acc.end());
  return BasicTensor<T>({a.dim(1)}, std::move(out));
}

}  // namespace hdfeat
