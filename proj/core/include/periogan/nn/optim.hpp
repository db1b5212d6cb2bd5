#pragma once

#include <cmath>
#include <vector>

#include "periogan/nn/layers.hpp"

namespace periogan::nn {

template <class T>
struct AdamT {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  int64_t t = 0;
  std::vector<std::vector<T>> m, v;

  AdamT() = default;
  AdamT(T lr_, T b1, T b2) : lr(lr_), beta1(b1), beta2(b2) {}

  void step(ParamSet<T>& params) {
    if (m.empty()) {
      m.resize(params.vars.size());
      v.resize(params.vars.size());
      for (size_t i = 0; i < params.vars.size(); ++i) {
        m[i].assign(static_cast<size_t>(params.vars[i].numel()), T(0));
        v[i].assign(static_cast<size_t>(params.vars[i].numel()), T(0));
      }
    }
    ++t;
    const T c1 = T(1) - std::pow(beta1, static_cast<T>(t));
    const T c2 = T(1) - std::pow(beta2, static_cast<T>(t));
    for (size_t i = 0; i < params.vars.size(); ++i) {
      auto& p = params.vars[i];
      if (!p.grad().defined()) continue;
      const T* g = p.grad().val().data();
      T* w = p.val_mut().data();
      for (int64_t j = 0; j < p.numel(); ++j) {
        m[i][j] = beta1 * m[i][j] + (T(1) - beta1) * g[j];
        v[i][j] = beta2 * v[i][j] + (T(1) - beta2) * g[j] * g[j];
        const T mhat = m[i][j] / c1;
        const T vhat = v[i][j] / c2;
        w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

template <class T>
struct RMSpropT {
  T lr = T(1e-2);
  T alpha = T(0.99);
  T eps = T(1e-8);
  std::vector<std::vector<T>> sq;

  RMSpropT() = default;
  explicit RMSpropT(T lr_) : lr(lr_) {}

  void step(ParamSet<T>& params) {
    if (sq.empty()) {
      sq.resize(params.vars.size());
      for (size_t i = 0; i < params.vars.size(); ++i)
        sq[i].assign(static_cast<size_t>(params.vars[i].numel()), T(0));
    }
    for (size_t i = 0; i < params.vars.size(); ++i) {
      auto& p = params.vars[i];
      if (!p.grad().defined()) continue;
      const T* g = p.grad().val().data();
      T* w = p.val_mut().data();
      for (int64_t j = 0; j < p.numel(); ++j) {
        sq[i][j] = alpha * sq[i][j] + (T(1) - alpha) * g[j] * g[j];
        w[j] -= lr * g[j] / (std::sqrt(sq[i][j]) + eps);
      }
    }
  }
};

using Adam = AdamT<float>;
using RMSprop = RMSpropT<float>;

}  // namespace periogan::nn
