#pragma once

#include <string>
#include <vector>

#include "periogan/nn/ops.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::nn {

/// Named parameter registry shared by layers, optimizers and checkpoints.
template <class T>
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Var<T>> vars;

  Var<T> add(const std::string& name, TensorT<T> init) {
    Var<T> v(std::move(init), true);
    names.push_back(name);
    vars.push_back(v);
    return v;
  }

  void zero_grad() {
    for (auto& v : vars) v.zero_grad();
  }

  int64_t count() const {
    int64_t n = 0;
    for (const auto& v : vars) n += v.numel();
    return n;
  }
};

template <class T>
TensorT<T> normal_init(Rng& rng, Shape shape, T std_dev) {
  TensorT<T> t(shape);
  for (auto& x : t.v) x = static_cast<T>(rng.normal(0.0, static_cast<double>(std_dev)));
  return t;
}

template <class T>
struct LinearT {
  Var<T> w;  // (out, in)
  Var<T> b;  // (1, out)
  T weight_mul = T(1);

  LinearT() = default;
  LinearT(ParamSet<T>& ps, const std::string& name, int in, int out, Rng& rng, T std_dev)
      : w(ps.add(name + ".w", normal_init<T>(rng, {out, in}, std_dev))),
        b(ps.add(name + ".b", TensorT<T>::zeros({1, out}))) {}

  Var<T> operator()(const Var<T>& x) const {
    Var<T> ww = weight_mul == T(1) ? w : mul_scalar(w, weight_mul);
    Var<T> y = matmul(x, ww, false, true);
    return add(y, broadcast_n(b, x.shape()[0]));
  }
};

/// Equalized-learning-rate linear layer: stores N(0,1) weights and applies the
/// He constant at runtime, optionally with a learning-rate multiplier.
template <class T>
LinearT<T> equalized_linear(ParamSet<T>& ps, const std::string& name, int in, int out,
                            Rng& rng, T lrmul = T(1)) {
  LinearT<T> l;
  l.w = ps.add(name + ".w", normal_init<T>(rng, {out, in}, T(1) / lrmul));
  l.b = ps.add(name + ".b", TensorT<T>::zeros({1, out}));
  l.weight_mul = lrmul / std::sqrt(static_cast<T>(in));
  return l;
}

template <class T>
struct Conv2dT {
  Var<T> w;  // (out, in, kh, kw)
  Var<T> b;  // (1, out)
  ConvSpec spec;

  Conv2dT() = default;
  Conv2dT(ParamSet<T>& ps, const std::string& name, int in, int out, int k, ConvSpec s,
          Rng& rng, T std_dev)
      : w(ps.add(name + ".w", normal_init<T>(rng, {out, in, k, k}, std_dev))),
        b(ps.add(name + ".b", TensorT<T>::zeros({1, out}))),
        spec(s) {}

  Var<T> operator()(const Var<T>& x) const { return bias_c(conv2d(x, w, spec), b); }
};

/// Transposed convolution. Weight layout (in, out, kh, kw) so that the forward
/// pass is exactly the input-gradient of a conv2d with this kernel.
template <class T>
struct ConvTranspose2dT {
  Var<T> w;
  Var<T> b;  // (1, out)
  ConvSpec spec;
  int k = 0;

  ConvTranspose2dT() = default;
  ConvTranspose2dT(ParamSet<T>& ps, const std::string& name, int in, int out, int k_,
                   ConvSpec s, Rng& rng, T std_dev)
      : w(ps.add(name + ".w", normal_init<T>(rng, {in, out, k_, k_}, std_dev))),
        b(ps.add(name + ".b", TensorT<T>::zeros({1, out}))),
        spec(s),
        k(k_) {}

  int out_extent(int in) const { return (in - 1) * spec.stride - 2 * spec.pad + k; }

  Var<T> operator()(const Var<T>& x) const {
    const int oh = out_extent(x.shape()[2]);
    const int ow = out_extent(x.shape()[3]);
    return bias_c(conv2d_igrad(x, w, spec, oh, ow), b);
  }
};

/// Per-sample, per-channel normalization over spatial extent, with optional
/// learned affine. Chosen over batch statistics so a checkpointed generator
/// reproduces each image independently of batch composition.
template <class T>
struct InstanceNormT {
  Var<T> gamma;  // (1, C)
  Var<T> beta;   // (1, C)
  bool affine = false;
  T eps = T(1e-5);

  InstanceNormT() = default;
  InstanceNormT(ParamSet<T>& ps, const std::string& name, int c)
      : gamma(ps.add(name + ".gamma", TensorT<T>::ones({1, c}))),
        beta(ps.add(name + ".beta", TensorT<T>::zeros({1, c}))),
        affine(true) {}

  Var<T> operator()(const Var<T>& x) const {
    const int n = x.shape()[0], h = x.shape()[2], w = x.shape()[3];
    const T inv_hw = T(1) / static_cast<T>(int64_t(h) * w);
    Var<T> mean = mul_scalar(reduce_hw(x), inv_hw);
    Var<T> centered = sub(x, broadcast_hw(mean, h, w));
    Var<T> var = mul_scalar(reduce_hw(mul(centered, centered)), inv_hw);
    Var<T> inv_std = reciprocal(sqrt(add_scalar(var, eps)));
    Var<T> y = mul(centered, broadcast_hw(inv_std, h, w));
    if (affine) {
      y = mul(y, broadcast_nhw(gamma, n, h, w));
      y = bias_c(y, beta);
    }
    return y;
  }
};

/// Normalizes each row of a (N, K) activation to unit RMS.
template <class T>
Var<T> pixel_norm(const Var<T>& x, T eps = T(1e-8)) {
  require(x.val().ndim() == 2, ErrorKind::ShapeError, "pixel_norm: (N,K) expected");
  const int k = x.shape()[1];
  Var<T> ms = mul_scalar(row_sum(mul(x, x)), T(1) / static_cast<T>(k));
  Var<T> inv = reciprocal(sqrt(add_scalar(ms, eps)));
  return mul(x, matmul(inv, constant(TensorT<T>::ones({1, k}))));
}

}  // namespace periogan::nn
