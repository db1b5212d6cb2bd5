#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "periogan/nn/autograd.hpp"

// Differentiable tensor primitives. Every backward rule is written with these
// same ops, so gradients can be re-derived through a gradient (as needed by
// the gradient-penalty term). The op set is closed under differentiation:
// conv2d / conv2d_igrad / conv2d_wgrad form a bilinear trio, broadcast and
// reduction ops come in adjoint pairs.

namespace periogan::nn {

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapRM = Eigen::Map<MatRM<T>>;
template <class T>
using CMapRM = Eigen::Map<const MatRM<T>>;

template <class T>
Var<T> constant(TensorT<T> value) {
  return Var<T>(std::move(value), false);
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a.val().same_shape(b.val()), ErrorKind::ShapeError,
          "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] + b.val().v[i];
  return make_op<T>(std::move(out), {a, b},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{g, g};
                    },
                    "add");
}

namespace detail {
template <class T>
Var<T> add_grads(const Var<T>& a, const Var<T>& b) {
  return nn::add(a, b);
}
}  // namespace detail

template <class T>
Var<T> neg(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = -a.val().v[i];
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{neg(g)};
                    },
                    "neg");
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require(a.val().same_shape(b.val()), ErrorKind::ShapeError,
          "sub: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] - b.val().v[i];
  return make_op<T>(std::move(out), {a, b},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{g, neg(g)};
                    },
                    "sub");
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require(a.val().same_shape(b.val()), ErrorKind::ShapeError,
          "mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] * b.val().v[i];
  return make_op<T>(std::move(out), {a, b},
                    [a, b](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{mul(g, b), mul(g, a)};
                    },
                    "mul");
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] + c;
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{g};
                    },
                    "add_scalar");
}

template <class T>
Var<T> mul_scalar(const Var<T>& a, T c) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] * c;
  return make_op<T>(std::move(out), {a},
                    [c](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{mul_scalar(g, c)};
                    },
                    "mul_scalar");
}

template <class T>
Var<T> sum_all(const Var<T>& a);
template <class T>
Var<T> broadcast_all(const Var<T>& s, Shape shape);

/// x * s where s is a one-element Var (e.g. a learned noise strength).
template <class T>
Var<T> scale(const Var<T>& a, const Var<T>& s) {
  require(s.numel() == 1, ErrorKind::ShapeError, "scale: scalar expected");
  const T c = s.val().v[0];
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = a.val().v[i] * c;
  return make_op<T>(std::move(out), {a, s},
                    [a, s](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{scale(g, s), sum_all(mul(g, a))};
                    },
                    "scale");
}

template <class T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const T x = a.val().v[i];
    out.v[i] = x > T(0) ? x : slope * x;
  }
  return make_op<T>(std::move(out), {a},
                    [a, slope](const Var<T>&, const Var<T>& g) {
                      // Slope mask is constant w.r.t. further differentiation
                      // (the second derivative is zero almost everywhere).
                      TensorT<T> mask(a.shape());
                      for (int64_t i = 0; i < mask.numel(); ++i)
                        mask.v[i] = a.val().v[i] > T(0) ? T(1) : slope;
                      return std::vector<Var<T>>{mul(g, constant(std::move(mask)))};
                    },
                    "leaky_relu");
}

template <class T>
Var<T> relu(const Var<T>& a) {
  return leaky_relu(a, T(0));
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = std::tanh(a.val().v[i]);
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>& y, const Var<T>& g) {
                      return std::vector<Var<T>>{
                          mul(g, add_scalar(neg(mul(y, y)), T(1)))};
                    },
                    "tanh");
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const T x = a.val().v[i];
    out.v[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : std::exp(x) / (T(1) + std::exp(x));
  }
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>& y, const Var<T>& g) {
                      return std::vector<Var<T>>{
                          mul(g, mul(y, add_scalar(neg(y), T(1))))};
                    },
                    "sigmoid");
}

template <class T>
Var<T> reciprocal(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = T(1) / a.val().v[i];
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>& y, const Var<T>& g) {
                      return std::vector<Var<T>>{neg(mul(g, mul(y, y)))};
                    },
                    "reciprocal");
}

template <class T>
Var<T> log(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = std::log(a.val().v[i]);
  return make_op<T>(std::move(out), {a},
                    [a](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{mul(g, reciprocal(a))};
                    },
                    "log");
}

template <class T>
Var<T> exp(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = std::exp(a.val().v[i]);
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>& y, const Var<T>& g) {
                      return std::vector<Var<T>>{mul(g, y)};
                    },
                    "exp");
}

template <class T>
Var<T> sqrt(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = std::sqrt(a.val().v[i]);
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>& y, const Var<T>& g) {
                      return std::vector<Var<T>>{
                          mul_scalar(mul(g, reciprocal(y)), T(0.5))};
                    },
                    "sqrt");
}

template <class T>
Var<T> softplus(const Var<T>& a) {
  TensorT<T> out(a.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const T x = a.val().v[i];
    out.v[i] = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  return make_op<T>(std::move(out), {a},
                    [a](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{mul(g, sigmoid(a))};
                    },
                    "softplus");
}

// ---------------------------------------------------------------------------
// shape movement
// ---------------------------------------------------------------------------

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  TensorT<T> out = reshaped(a.val(), shape);
  Shape orig = a.shape();
  return make_op<T>(std::move(out), {a},
                    [orig](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{reshape(g, orig)};
                    },
                    "reshape");
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  require(a.shape().size() == 2, ErrorKind::ShapeError, "transpose: 2-D only");
  const int n = a.shape()[0], m = a.shape()[1];
  TensorT<T> out({m, n});
  CMapRM<T> src(a.val().data(), n, m);
  MapRM<T> dst(out.data(), m, n);
  dst = src.transpose();
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{transpose(g)};
                    },
                    "transpose");
}

namespace detail {
// Treats 2-D tensors as (N, C) with a trailing extent of 1.
template <class T>
void split_axis1(const TensorT<T>& t, int64_t& n, int64_t& c, int64_t& inner) {
  require(t.ndim() >= 2, ErrorKind::ShapeError, "expected >=2-D tensor");
  n = t.shape[0];
  c = t.shape[1];
  inner = 1;
  for (int i = 2; i < t.ndim(); ++i) inner *= t.shape[i];
}
}  // namespace detail

template <class T>
Var<T> slice_c(const Var<T>& a, int c0, int c1);

template <class T>
Var<T> concat_c(const Var<T>& a, const Var<T>& b) {
  int64_t n, ca, inner, n2, cb, inner2;
  detail::split_axis1(a.val(), n, ca, inner);
  detail::split_axis1(b.val(), n2, cb, inner2);
  require(n == n2 && inner == inner2 && a.val().ndim() == b.val().ndim(),
          ErrorKind::ShapeError, "concat_c: incompatible shapes");
  Shape s = a.shape();
  s[1] = static_cast<int>(ca + cb);
  TensorT<T> out(s);
  for (int64_t i = 0; i < n; ++i) {
    std::memcpy(out.data() + (i * (ca + cb)) * inner, a.val().data() + i * ca * inner,
                sizeof(T) * static_cast<size_t>(ca * inner));
    std::memcpy(out.data() + (i * (ca + cb) + ca) * inner, b.val().data() + i * cb * inner,
                sizeof(T) * static_cast<size_t>(cb * inner));
  }
  const int cai = static_cast<int>(ca), cbi = static_cast<int>(cb);
  return make_op<T>(std::move(out), {a, b},
                    [cai, cbi](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{slice_c(g, 0, cai),
                                                 slice_c(g, cai, cai + cbi)};
                    },
                    "concat_c");
}

template <class T>
Var<T> pad_c(const Var<T>& a, int total_c, int offset);

template <class T>
Var<T> slice_c(const Var<T>& a, int c0, int c1) {
  int64_t n, c, inner;
  detail::split_axis1(a.val(), n, c, inner);
  require(0 <= c0 && c0 < c1 && c1 <= c, ErrorKind::ShapeError, "slice_c: bad range");
  Shape s = a.shape();
  s[1] = c1 - c0;
  TensorT<T> out(s);
  const int64_t cw = c1 - c0;
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(out.data() + i * cw * inner, a.val().data() + (i * c + c0) * inner,
                sizeof(T) * static_cast<size_t>(cw * inner));
  const int ci = static_cast<int>(c);
  return make_op<T>(std::move(out), {a},
                    [ci, c0](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{pad_c(g, ci, c0)};
                    },
                    "slice_c");
}

template <class T>
Var<T> pad_c(const Var<T>& a, int total_c, int offset) {
  int64_t n, c, inner;
  detail::split_axis1(a.val(), n, c, inner);
  require(offset >= 0 && offset + c <= total_c, ErrorKind::ShapeError, "pad_c: bad range");
  Shape s = a.shape();
  s[1] = total_c;
  TensorT<T> out(s);  // zero-filled
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(out.data() + (i * total_c + offset) * inner, a.val().data() + i * c * inner,
                sizeof(T) * static_cast<size_t>(c * inner));
  const int ci = static_cast<int>(c);
  return make_op<T>(std::move(out), {a},
                    [offset, ci](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{slice_c(g, offset, offset + ci)};
                    },
                    "pad_c");
}

template <class T>
Var<T> downsum2(const Var<T>& a);

/// Nearest-neighbour 2x upsampling (NCHW).
template <class T>
Var<T> upsample2(const Var<T>& a) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "upsample2: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  TensorT<T> out({n, c, 2 * h, 2 * w});
  const T* src = a.val().data();
  T* dst = out.data();
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* sp = src + nc * h * w;
    T* dp = dst + nc * 4 * h * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T v = sp[y * w + x];
        T* q = dp + (2 * y) * (2 * w) + 2 * x;
        q[0] = v;
        q[1] = v;
        q[2 * w] = v;
        q[2 * w + 1] = v;
      }
    }
  }
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{downsum2(g)};
                    },
                    "upsample2");
}

/// Adjoint of upsample2: sums each 2x2 block.
template <class T>
Var<T> downsum2(const Var<T>& a) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "downsum2: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  require(h % 2 == 0 && w % 2 == 0, ErrorKind::ShapeError, "downsum2: odd extent");
  TensorT<T> out({n, c, h / 2, w / 2});
  const T* src = a.val().data();
  T* dst = out.data();
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* sp = src + nc * h * w;
    T* dp = dst + nc * (h / 2) * (w / 2);
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x)
        dp[y * (w / 2) + x] = sp[2 * y * w + 2 * x] + sp[2 * y * w + 2 * x + 1] +
                              sp[(2 * y + 1) * w + 2 * x] + sp[(2 * y + 1) * w + 2 * x + 1];
  }
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{upsample2(g)};
                    },
                    "downsum2");
}

template <class T>
Var<T> pad_hw(const Var<T>& a, int out_h, int out_w, int off_h, int off_w);

template <class T>
Var<T> crop_hw(const Var<T>& a, int off_h, int off_w, int out_h, int out_w) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "crop_hw: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  require(off_h >= 0 && off_w >= 0 && off_h + out_h <= h && off_w + out_w <= w,
          ErrorKind::ShapeError, "crop_hw: window out of range");
  TensorT<T> out({n, c, out_h, out_w});
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* sp = a.val().data() + nc * h * w;
    T* dp = out.data() + nc * out_h * out_w;
    for (int y = 0; y < out_h; ++y)
      std::memcpy(dp + y * out_w, sp + (y + off_h) * w + off_w,
                  sizeof(T) * static_cast<size_t>(out_w));
  }
  return make_op<T>(std::move(out), {a},
                    [h, w, off_h, off_w](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{pad_hw(g, h, w, off_h, off_w)};
                    },
                    "crop_hw");
}

template <class T>
Var<T> pad_hw(const Var<T>& a, int out_h, int out_w, int off_h, int off_w) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "pad_hw: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  require(off_h >= 0 && off_w >= 0 && off_h + h <= out_h && off_w + w <= out_w,
          ErrorKind::ShapeError, "pad_hw: window out of range");
  TensorT<T> out({n, c, out_h, out_w});
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* sp = a.val().data() + nc * h * w;
    T* dp = out.data() + nc * out_h * out_w;
    for (int y = 0; y < h; ++y)
      std::memcpy(dp + (y + off_h) * out_w + off_w, sp + y * w,
                  sizeof(T) * static_cast<size_t>(w));
  }
  const int hh = h, ww = w;
  return make_op<T>(std::move(out), {a},
                    [off_h, off_w, hh, ww](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{crop_hw(g, off_h, off_w, hh, ww)};
                    },
                    "pad_hw");
}

// ---------------------------------------------------------------------------
// broadcast / reduction adjoint pairs
// ---------------------------------------------------------------------------

template <class T>
Var<T> reduce_n(const Var<T>& a);

/// Replicates a (1, ...) tensor N times along axis 0.
template <class T>
Var<T> broadcast_n(const Var<T>& a, int n) {
  require(a.shape()[0] == 1, ErrorKind::ShapeError, "broadcast_n: axis 0 must be 1");
  Shape s = a.shape();
  s[0] = n;
  TensorT<T> out(s);
  const int64_t inner = a.numel();
  for (int i = 0; i < n; ++i)
    std::memcpy(out.data() + int64_t(i) * inner, a.val().data(),
                sizeof(T) * static_cast<size_t>(inner));
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{reduce_n(g)};
                    },
                    "broadcast_n");
}

template <class T>
Var<T> reduce_n(const Var<T>& a) {
  const int n = a.shape()[0];
  Shape s = a.shape();
  s[0] = 1;
  TensorT<T> out(s);
  const int64_t inner = out.numel();
  for (int i = 0; i < n; ++i)
    for (int64_t j = 0; j < inner; ++j) out.v[j] += a.val().v[int64_t(i) * inner + j];
  return make_op<T>(std::move(out), {a},
                    [n](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{broadcast_n(g, n)};
                    },
                    "reduce_n");
}

template <class T>
Var<T> sum_c(const Var<T>& a);

/// (N,1,H,W) -> (N,C,H,W) replication across channels.
template <class T>
Var<T> broadcast_c(const Var<T>& a, int c) {
  require(a.val().ndim() == 4 && a.shape()[1] == 1, ErrorKind::ShapeError,
          "broadcast_c: (N,1,H,W) expected");
  const int n = a.shape()[0], h = a.shape()[2], w = a.shape()[3];
  TensorT<T> out({n, c, h, w});
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      std::memcpy(out.data() + (int64_t(i) * c + j) * hw, a.val().data() + int64_t(i) * hw,
                  sizeof(T) * static_cast<size_t>(hw));
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{sum_c(g)};
                    },
                    "broadcast_c");
}

template <class T>
Var<T> sum_c(const Var<T>& a) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "sum_c: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  TensorT<T> out({n, 1, h, w});
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j)
      for (int64_t k = 0; k < hw; ++k)
        out.v[int64_t(i) * hw + k] += a.val().v[(int64_t(i) * c + j) * hw + k];
  const int cc = c;
  return make_op<T>(std::move(out), {a},
                    [cc](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{broadcast_c(g, cc)};
                    },
                    "sum_c");
}

template <class T>
Var<T> reduce_hw(const Var<T>& a);

/// (N,C) -> (N,C,H,W).
template <class T>
Var<T> broadcast_hw(const Var<T>& a, int h, int w) {
  require(a.val().ndim() == 2, ErrorKind::ShapeError, "broadcast_hw: (N,C) expected");
  const int n = a.shape()[0], c = a.shape()[1];
  TensorT<T> out({n, c, h, w});
  const int64_t hw = int64_t(h) * w;
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T v = a.val().v[nc];
    T* dp = out.data() + nc * hw;
    for (int64_t k = 0; k < hw; ++k) dp[k] = v;
  }
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{reduce_hw(g)};
                    },
                    "broadcast_hw");
}

template <class T>
Var<T> reduce_hw(const Var<T>& a) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "reduce_hw: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  TensorT<T> out({n, c});
  const int64_t hw = int64_t(h) * w;
  for (int64_t nc = 0; nc < int64_t(n) * c; ++nc) {
    const T* sp = a.val().data() + nc * hw;
    T acc = T(0);
    for (int64_t k = 0; k < hw; ++k) acc += sp[k];
    out.v[nc] = acc;
  }
  return make_op<T>(std::move(out), {a},
                    [h, w](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{broadcast_hw(g, h, w)};
                    },
                    "reduce_hw");
}

template <class T>
Var<T> sum_nhw(const Var<T>& a);

/// (1,C) -> (N,C,H,W); adjoint of sum_nhw.
template <class T>
Var<T> broadcast_nhw(const Var<T>& a, int n, int h, int w) {
  require(a.val().ndim() == 2 && a.shape()[0] == 1, ErrorKind::ShapeError,
          "broadcast_nhw: (1,C) expected");
  const int c = a.shape()[1];
  TensorT<T> out({n, c, h, w});
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T v = a.val().v[j];
      T* dp = out.data() + (int64_t(i) * c + j) * hw;
      for (int64_t k = 0; k < hw; ++k) dp[k] = v;
    }
  return make_op<T>(std::move(out), {a},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{sum_nhw(g)};
                    },
                    "broadcast_nhw");
}

template <class T>
Var<T> sum_nhw(const Var<T>& a) {
  require(a.val().ndim() == 4, ErrorKind::ShapeError, "sum_nhw: NCHW expected");
  const int n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
  TensorT<T> out({1, c});
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const T* sp = a.val().data() + (int64_t(i) * c + j) * hw;
      T acc = T(0);
      for (int64_t k = 0; k < hw; ++k) acc += sp[k];
      out.v[j] += acc;
    }
  return make_op<T>(std::move(out), {a},
                    [n, h, w](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{broadcast_nhw(g, n, h, w)};
                    },
                    "sum_nhw");
}

/// Per-channel bias for NCHW activations; bias shaped (1,C).
template <class T>
Var<T> bias_c(const Var<T>& x, const Var<T>& b) {
  require(x.val().ndim() == 4 && b.val().ndim() == 2 && b.shape()[0] == 1 &&
              b.shape()[1] == x.shape()[1],
          ErrorKind::ShapeError, "bias_c: shape mismatch");
  const int n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  TensorT<T> out = x.val();
  const int64_t hw = int64_t(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      T* dp = out.data() + (int64_t(i) * c + j) * hw;
      const T v = b.val().v[j];
      for (int64_t k = 0; k < hw; ++k) dp[k] += v;
    }
  return make_op<T>(std::move(out), {x, b},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{g, sum_nhw(g)};
                    },
                    "bias_c");
}

template <class T>
Var<T> sum_all(const Var<T>& a) {
  TensorT<T> out({1});
  T acc = T(0);
  for (int64_t i = 0; i < a.numel(); ++i) acc += a.val().v[i];
  out.v[0] = acc;
  Shape orig = a.shape();
  return make_op<T>(std::move(out), {a},
                    [orig](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{broadcast_all(g, orig)};
                    },
                    "sum_all");
}

template <class T>
Var<T> broadcast_all(const Var<T>& s, Shape shape) {
  require(s.numel() == 1, ErrorKind::ShapeError, "broadcast_all: scalar expected");
  TensorT<T> out = TensorT<T>::full(shape, s.val().v[0]);
  return make_op<T>(std::move(out), {s},
                    [](const Var<T>&, const Var<T>& g) {
                      return std::vector<Var<T>>{sum_all(g)};
                    },
                    "broadcast_all");
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  return mul_scalar(sum_all(a), T(1) / static_cast<T>(a.numel()));
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta = false, bool tb = false) {
  require(a.val().ndim() == 2 && b.val().ndim() == 2, ErrorKind::ShapeError,
          "matmul: 2-D operands expected");
  const int ar = a.shape()[0], ac = a.shape()[1];
  const int br = b.shape()[0], bc = b.shape()[1];
  const int n = ta ? ac : ar, k = ta ? ar : ac;
  const int k2 = tb ? bc : br, m = tb ? br : bc;
  require(k == k2, ErrorKind::ShapeError,
          "matmul: inner dims " + std::to_string(k) + " vs " + std::to_string(k2));
  TensorT<T> out({n, m});
  CMapRM<T> A(a.val().data(), ar, ac);
  CMapRM<T> B(b.val().data(), br, bc);
  MapRM<T> Y(out.data(), n, m);
  if (!ta && !tb)
    Y.noalias() = A * B;
  else if (ta && !tb)
    Y.noalias() = A.transpose() * B;
  else if (!ta && tb)
    Y.noalias() = A * B.transpose();
  else
    Y.noalias() = A.transpose() * B.transpose();
  return make_op<T>(std::move(out), {a, b},
                    [a, b, ta, tb](const Var<T>&, const Var<T>& g) {
                      Var<T> da = matmul(g, b, false, !tb);
                      if (ta) da = transpose(da);
                      Var<T> db = matmul(a, g, !ta, false);
                      if (tb) db = transpose(db);
                      return std::vector<Var<T>>{da, db};
                    },
                    "matmul");
}

// ---------------------------------------------------------------------------
// convolution trio
// ---------------------------------------------------------------------------

struct ConvSpec {
  int stride = 1;
  int pad = 0;
};

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

template <class T>
void im2col(const T* x, int ic, int h, int w, int kh, int kw, int stride, int pad,
            int oh, int ow, T* cols) {
  // cols is (ic*kh*kw) x (oh*ow), row-major
  for (int ci = 0; ci < ic; ++ci) {
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        T* row = cols + int64_t((ci * kh + dy) * kw + dx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad + dy;
          if (sy < 0 || sy >= h) {
            std::fill(row + int64_t(y) * ow, row + int64_t(y + 1) * ow, T(0));
            continue;
          }
          const T* src = x + (int64_t(ci) * h + sy) * w;
          for (int xx = 0; xx < ow; ++xx) {
            const int sx = xx * stride - pad + dx;
            row[int64_t(y) * ow + xx] = (sx >= 0 && sx < w) ? src[sx] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, int ic, int h, int w, int kh, int kw, int stride, int pad,
                int oh, int ow, T* x) {
  for (int ci = 0; ci < ic; ++ci) {
    for (int dy = 0; dy < kh; ++dy) {
      for (int dx = 0; dx < kw; ++dx) {
        const T* row = cols + int64_t((ci * kh + dy) * kw + dx) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int sy = y * stride - pad + dy;
          if (sy < 0 || sy >= h) continue;
          T* dst = x + (int64_t(ci) * h + sy) * w;
          for (int xx = 0; xx < ow; ++xx) {
            const int sx = xx * stride - pad + dx;
            if (sx >= 0 && sx < w) dst[sx] += row[int64_t(y) * ow + xx];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <class T>
Var<T> conv2d_igrad(const Var<T>& g, const Var<T>& w, ConvSpec spec, int in_h, int in_w);
template <class T>
Var<T> conv2d_wgrad(const Var<T>& x, const Var<T>& g, ConvSpec spec, int kh, int kw);

/// y[n,o] = sum_i x[n,i] * w[o,i]  (cross-correlation, NCHW / OIHW).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, ConvSpec spec) {
  require(x.val().ndim() == 4 && w.val().ndim() == 4, ErrorKind::ShapeError,
          "conv2d: NCHW input and OIHW weight expected");
  const int n = x.shape()[0], ic = x.shape()[1], h = x.shape()[2], ww = x.shape()[3];
  const int oc = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
  require(w.shape()[1] == ic, ErrorKind::ShapeError, "conv2d: channel mismatch");
  const int oh = conv_out_extent(h, kh, spec.stride, spec.pad);
  const int ow = conv_out_extent(ww, kw, spec.stride, spec.pad);
  require(oh > 0 && ow > 0, ErrorKind::ShapeError, "conv2d: empty output");
  const int kk = ic * kh * kw;
  TensorT<T> out({n, oc, oh, ow});
  std::vector<T> cols(static_cast<size_t>(kk) * oh * ow);
  CMapRM<T> W(w.val().data(), oc, kk);
  for (int i = 0; i < n; ++i) {
    detail::im2col(x.val().data() + int64_t(i) * ic * h * ww, ic, h, ww, kh, kw,
                   spec.stride, spec.pad, oh, ow, cols.data());
    CMapRM<T> C(cols.data(), kk, oh * ow);
    MapRM<T> Y(out.data() + int64_t(i) * oc * oh * ow, oc, oh * ow);
    Y.noalias() = W * C;
  }
  return make_op<T>(std::move(out), {x, w},
                    [x, w, spec, h, ww, kh, kw](const Var<T>&, const Var<T>& g) {
                      std::vector<Var<T>> gs(2);
                      if (x.requires_grad()) gs[0] = conv2d_igrad(g, w, spec, h, ww);
                      if (w.requires_grad()) gs[1] = conv2d_wgrad(x, g, spec, kh, kw);
                      return gs;
                    },
                    "conv2d");
}

/// Adjoint of conv2d in its input: scatters g back through w. This is also
/// the forward map of a transposed convolution.
template <class T>
Var<T> conv2d_igrad(const Var<T>& g, const Var<T>& w, ConvSpec spec, int in_h, int in_w) {
  require(g.val().ndim() == 4 && w.val().ndim() == 4, ErrorKind::ShapeError,
          "conv2d_igrad: NCHW/OIHW expected");
  const int n = g.shape()[0], oc = g.shape()[1], oh = g.shape()[2], ow = g.shape()[3];
  const int ic = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  require(w.shape()[0] == oc, ErrorKind::ShapeError, "conv2d_igrad: channel mismatch");
  require(conv_out_extent(in_h, kh, spec.stride, spec.pad) == oh &&
              conv_out_extent(in_w, kw, spec.stride, spec.pad) == ow,
          ErrorKind::ShapeError, "conv2d_igrad: geometry mismatch");
  const int kk = ic * kh * kw;
  TensorT<T> out({n, ic, in_h, in_w});
  std::vector<T> cols(static_cast<size_t>(kk) * oh * ow);
  CMapRM<T> W(w.val().data(), oc, kk);
  for (int i = 0; i < n; ++i) {
    CMapRM<T> G(g.val().data() + int64_t(i) * oc * oh * ow, oc, oh * ow);
    MapRM<T> C(cols.data(), kk, oh * ow);
    C.noalias() = W.transpose() * G;
    detail::col2im_add(cols.data(), ic, in_h, in_w, kh, kw, spec.stride, spec.pad, oh, ow,
                       out.data() + int64_t(i) * ic * in_h * in_w);
  }
  return make_op<T>(std::move(out), {g, w},
                    [g, w, spec, kh, kw](const Var<T>&, const Var<T>& gg) {
                      std::vector<Var<T>> gs(2);
                      if (g.requires_grad()) gs[0] = conv2d(gg, w, spec);
                      if (w.requires_grad()) gs[1] = conv2d_wgrad(gg, g, spec, kh, kw);
                      return gs;
                    },
                    "conv2d_igrad");
}

/// Adjoint of conv2d in its weights.
template <class T>
Var<T> conv2d_wgrad(const Var<T>& x, const Var<T>& g, ConvSpec spec, int kh, int kw) {
  require(x.val().ndim() == 4 && g.val().ndim() == 4, ErrorKind::ShapeError,
          "conv2d_wgrad: NCHW expected");
  const int n = x.shape()[0], ic = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int oc = g.shape()[1], oh = g.shape()[2], ow = g.shape()[3];
  require(g.shape()[0] == n, ErrorKind::ShapeError, "conv2d_wgrad: batch mismatch");
  require(conv_out_extent(h, kh, spec.stride, spec.pad) == oh &&
              conv_out_extent(w, kw, spec.stride, spec.pad) == ow,
          ErrorKind::ShapeError, "conv2d_wgrad: geometry mismatch");
  const int kk = ic * kh * kw;
  TensorT<T> out({oc, ic, kh, kw});
  std::vector<T> cols(static_cast<size_t>(kk) * oh * ow);
  MapRM<T> DW(out.data(), oc, kk);
  for (int i = 0; i < n; ++i) {
    detail::im2col(x.val().data() + int64_t(i) * ic * h * w, ic, h, w, kh, kw, spec.stride,
                   spec.pad, oh, ow, cols.data());
    CMapRM<T> C(cols.data(), kk, oh * ow);
    CMapRM<T> G(g.val().data() + int64_t(i) * oc * oh * ow, oc, oh * ow);
    DW.noalias() += G * C.transpose();
  }
  const int in_h = h, in_w = w;
  return make_op<T>(std::move(out), {x, g},
                    [x, g, spec, in_h, in_w](const Var<T>&, const Var<T>& gu) {
                      std::vector<Var<T>> gs(2);
                      if (x.requires_grad()) gs[0] = conv2d_igrad(g, gu, spec, in_h, in_w);
                      if (g.requires_grad()) gs[1] = conv2d(x, gu, spec);
                      return gs;
                    },
                    "conv2d_wgrad");
}

// ---------------------------------------------------------------------------
// composed helpers
// ---------------------------------------------------------------------------

/// Row-wise sum of a 2-D tensor -> (N,1).
template <class T>
Var<T> row_sum(const Var<T>& a) {
  require(a.val().ndim() == 2, ErrorKind::ShapeError, "row_sum: 2-D expected");
  return matmul(a, constant(TensorT<T>::ones({a.shape()[1], 1})));
}

/// Per-row L2 norm with an epsilon floor inside the square root.
template <class T>
Var<T> row_norm(const Var<T>& a, T eps) {
  return sqrt(add_scalar(row_sum(mul(a, a)), eps));
}

}  // namespace periogan::nn
