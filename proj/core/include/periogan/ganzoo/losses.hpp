#pragma once

#include <functional>

#include "periogan/nn/layers.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::ganzoo {

/// Standard normal latent batch, (n, d_z), deterministic per rng state.
template <class T>
nn::TensorT<T> sample_latent_t(Rng& rng, int n, int d_z) {
  require(n >= 1 && d_z >= 1, ErrorKind::InvalidConfig, "latent batch dims must be >= 1");
  nn::TensorT<T> z({n, d_z});
  for (auto& x : z.v) x = static_cast<T>(rng.normal());
  return z;
}

inline nn::Tensor sample_latent(Rng& rng, int n, int d_z) {
  return sample_latent_t<float>(rng, n, d_z);
}

template <class T>
struct AdvLosses {
  nn::Var<T> loss_d;
  nn::Var<T> loss_g;
};

/// Cross-entropy min-max losses on post-sigmoid scores in (0,1):
///   loss_D = -E[log D(x)] - E[log(1 - D(G(z)))]
///   loss_G =  E[log(1 - D(G(z)))], or -E[log D(G(z))] when non-saturating.
template <class T>
AdvLosses<T> adversarial_losses(const nn::Var<T>& d_real, const nn::Var<T>& d_fake,
                                bool non_saturating = false) {
  require(d_real.numel() >= 1 && d_fake.numel() >= 1, ErrorKind::EmptyBatch,
          "adversarial_losses: empty score set");
  for (const auto* v : {&d_real, &d_fake})
    for (int64_t i = 0; i < v->numel(); ++i) {
      const T s = v->val().v[static_cast<size_t>(i)];
      require(s > T(0) && s < T(1), ErrorKind::DomainError,
              "scores must lie strictly inside (0,1)");
    }
  nn::Var<T> one_minus_fake = nn::add_scalar(nn::neg(d_fake), T(1));
  nn::Var<T> loss_d = nn::sub(nn::neg(nn::mean_all(nn::log(d_real))),
                              nn::mean_all(nn::log(one_minus_fake)));
  nn::Var<T> loss_g = non_saturating ? nn::neg(nn::mean_all(nn::log(d_fake)))
                                     : nn::mean_all(nn::log(one_minus_fake));
  return {loss_d, loss_g};
}

/// Same objective on raw logits via softplus; numerically safe for training.
template <class T>
AdvLosses<T> adversarial_losses_logits(const nn::Var<T>& real_logits,
                                       const nn::Var<T>& fake_logits,
                                       bool non_saturating = true) {
  require(real_logits.numel() >= 1 && fake_logits.numel() >= 1, ErrorKind::EmptyBatch,
          "adversarial_losses_logits: empty score set");
  nn::Var<T> loss_d = nn::add(nn::mean_all(nn::softplus(nn::neg(real_logits))),
                              nn::mean_all(nn::softplus(fake_logits)));
  nn::Var<T> loss_g = non_saturating
                          ? nn::mean_all(nn::softplus(nn::neg(fake_logits)))
                          : nn::neg(nn::mean_all(nn::softplus(fake_logits)));
  return {loss_d, loss_g};
}

/// critic loss = mean(fake) - mean(real); unbounded scores, no sigmoid.
template <class T>
nn::Var<T> wasserstein_critic_loss(const nn::Var<T>& real_scores,
                                   const nn::Var<T>& fake_scores) {
  require(real_scores.numel() >= 1 && fake_scores.numel() >= 1, ErrorKind::EmptyBatch,
          "wasserstein_critic_loss: empty score set");
  return nn::sub(nn::mean_all(fake_scores), nn::mean_all(real_scores));
}

template <class T>
nn::Var<T> wasserstein_generator_loss(const nn::Var<T>& fake_scores) {
  require(fake_scores.numel() >= 1, ErrorKind::EmptyBatch,
          "wasserstein_generator_loss: empty score set");
  return nn::neg(nn::mean_all(fake_scores));
}

/// lambda * E[(||grad_xhat D(xhat)||_2 - 1)^2], xhat = eps*x + (1-eps)*x~ with
/// per-example eps ~ U[0,1]. The returned Var is differentiable w.r.t. the
/// critic parameters (double backprop through the inner gradient).
template <class T>
nn::Var<T> gradient_penalty(const std::function<nn::Var<T>(const nn::Var<T>&)>& critic,
                            const nn::TensorT<T>& real_batch,
                            const nn::TensorT<T>& fake_batch, Rng& rng,
                            T lambda = T(10)) {
  require(real_batch.same_shape(fake_batch), ErrorKind::ShapeError,
          "gradient_penalty: real/fake batch shapes differ");
  require(lambda > T(0), ErrorKind::InvalidConfig, "gradient_penalty: lambda must be > 0");
  const int n = real_batch.shape.at(0);
  const int64_t per = real_batch.numel() / n;
  nn::TensorT<T> xhat(real_batch.shape);
  for (int i = 0; i < n; ++i) {
    const T eps = static_cast<T>(rng.uniform());
    for (int64_t j = 0; j < per; ++j) {
      const int64_t k = i * per + j;
      xhat.v[static_cast<size_t>(k)] =
          eps * real_batch.v[static_cast<size_t>(k)] +
          (T(1) - eps) * fake_batch.v[static_cast<size_t>(k)];
    }
  }
  nn::Var<T> x(std::move(xhat), true);
  nn::Var<T> scores = critic(x);
  nn::Var<T> g = nn::grad(nn::sum_all(scores), {x}, true)[0];
  nn::Var<T> flat = nn::reshape(g, {n, static_cast<int>(per)});
  nn::Var<T> norms = nn::row_norm(flat, T(1e-12));
  nn::Var<T> dev = nn::add_scalar(norms, T(-1));
  return nn::mul_scalar(nn::mean_all(nn::mul(dev, dev)), lambda);
}

/// Clamps every parameter entry into [-c, c] in place.
template <class T>
void clip_weights(nn::ParamSet<T>& params, T c) {
  require(c > T(0), ErrorKind::InvalidBound, "clip bound must be > 0");
  for (auto& p : params.vars)
    for (auto& w : p.val_mut().v) w = std::clamp(w, -c, c);
}

}  // namespace periogan::ganzoo
