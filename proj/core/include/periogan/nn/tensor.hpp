#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "periogan/util/error.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::nn {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

/// Dense row-major tensor. All neural-net state is float; the FID / t-SNE
/// numerics run on the double instantiation.
template <class T>
struct TensorT {
  Shape shape;
  std::vector<T> v;

  TensorT() = default;
  explicit TensorT(Shape s) : shape(std::move(s)), v(static_cast<size_t>(shape_numel(shape)), T(0)) {}
  TensorT(Shape s, std::vector<T> data) : shape(std::move(s)), v(std::move(data)) {
    require(static_cast<int64_t>(v.size()) == shape_numel(shape), ErrorKind::ShapeError,
            "tensor data size does not match shape " + shape_str(shape));
  }

  static TensorT zeros(Shape s) { return TensorT(std::move(s)); }

  static TensorT full(Shape s, T value) {
    TensorT t(std::move(s));
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }

  static TensorT ones(Shape s) { return full(std::move(s), T(1)); }

  static TensorT scalar(T value) { return full({1}, value); }

  static TensorT randn(Shape s, Rng& rng, T stddev = T(1)) {
    TensorT t(std::move(s));
    for (auto& x : t.v) x = static_cast<T>(rng.normal()) * stddev;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int dim(size_t i) const { return shape.at(i); }
  int ndim() const { return static_cast<int>(shape.size()); }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  T& at(std::initializer_list<int> idx) {
    return v[static_cast<size_t>(offset(idx))];
  }
  T at(std::initializer_list<int> idx) const {
    return v[static_cast<size_t>(offset(idx))];
  }

  int64_t offset(std::initializer_list<int> idx) const {
    int64_t off = 0;
    size_t k = 0;
    for (int i : idx) {
      off = off * shape[k] + i;
      ++k;
    }
    return off;
  }
};

using Tensor = TensorT<float>;

template <class T>
TensorT<T> reshaped(const TensorT<T>& t, Shape s) {
  require(shape_numel(s) == t.numel(), ErrorKind::ShapeError,
          "reshape " + shape_str(t.shape) + " -> " + shape_str(s));
  return TensorT<T>(std::move(s), t.v);
}

}  // namespace periogan::nn
