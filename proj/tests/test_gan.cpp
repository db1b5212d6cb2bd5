#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <periogan/ganzoo/checkpoint.hpp>
#include <periogan/ganzoo/losses.hpp>
#include <periogan/ganzoo/models.hpp>
#include <periogan/util/error.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

namespace pn = periogan::nn;
namespace pg = periogan::ganzoo;
using periogan::Error;
using periogan::ErrorKind;
using periogan::Rng;

namespace {

using DVar = pn::Var<double>;
using DTensor = pn::TensorT<double>;

DTensor drand(Rng& rng, pn::Shape shape, double lo = -1.0, double hi = 1.0) {
  DTensor t(std::move(shape));
  for (auto& v : t.v) v = lo + (hi - lo) * rng.uniform();
  return t;
}

template <class F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL_CHECK("expected an error of kind " << periogan::to_string(kind));
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

// Central-difference derivative of f with respect to one entry of a tensor
// that f reads by reference.
double fd_probe(const std::function<double()>& f, double& cell, double h) {
  const double keep = cell;
  cell = keep + h;
  const double up = f();
  cell = keep - h;
  const double dn = f();
  cell = keep;
  return (up - dn) / (2.0 * h);
}

std::filesystem::path temp_file(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("periogan_gan_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir / tag;
}

}  // namespace

TEST_CASE("latent sampling") {
  SUBCASE("standard normal moments") {
    Rng rng(2026);
    auto z = pg::sample_latent(rng, 10000, 128);
    REQUIRE(z.shape == pn::Shape{10000, 128});
    // CLT bound: the sample mean of 10k unit-variance draws stays within
    // four standard errors, 4/sqrt(10000) = 0.04.
    for (int j = 0; j < 128; ++j) {
      double m = 0.0;
      for (int i = 0; i < 10000; ++i) m += z.v[static_cast<size_t>(i) * 128 + j];
      m /= 10000.0;
      CHECK(std::abs(m) < 0.04);
    }
    double var = 0.0;
    for (float v : z.v) var += static_cast<double>(v) * v;
    var /= static_cast<double>(z.v.size());
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  }

  SUBCASE("deterministic per seed") {
    Rng a(7), b(7), c(8);
    auto za = pg::sample_latent(a, 4, 512);
    auto zb = pg::sample_latent(b, 4, 512);
    auto zc = pg::sample_latent(c, 4, 512);
    CHECK(za.v == zb.v);
    CHECK(za.v != zc.v);
    CHECK(za.shape == pn::Shape{4, 512});
  }

  SUBCASE("degenerate dims rejected") {
    Rng rng(1);
    expect_kind([&] { pg::sample_latent(rng, 0, 128); }, ErrorKind::InvalidConfig);
    expect_kind([&] { pg::sample_latent(rng, 4, 0); }, ErrorKind::InvalidConfig);
  }
}

TEST_CASE("adversarial losses") {
  SUBCASE("perfect discriminator drives loss_D to zero") {
    const double eps = 1e-9;
    DTensor real({2, 1});
    real.v = {1.0 - eps, 1.0 - eps};
    DTensor fake({2, 1});
    fake.v = {eps, eps};
    auto out = pg::adversarial_losses<double>(pn::constant(real), pn::constant(fake));
    CHECK(std::abs(out.loss_d.item()) < 1e-6);
  }

  SUBCASE("uninformative discriminator gives 2 log 2") {
    DTensor half({3, 1});
    half.v = {0.5, 0.5, 0.5};
    auto out = pg::adversarial_losses<double>(pn::constant(half), pn::constant(half));
    CHECK(out.loss_d.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    // Saturating generator loss at D = 0.5 is log(1/2).
    CHECK(out.loss_g.item() == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  }

  SUBCASE("non-saturating generator loss") {
    DTensor fake({2, 1});
    fake.v = {0.25, 0.75};
    DTensor real({2, 1});
    real.v = {0.6, 0.6};
    auto sat = pg::adversarial_losses<double>(pn::constant(real), pn::constant(fake), false);
    auto nonsat = pg::adversarial_losses<double>(pn::constant(real), pn::constant(fake), true);
    CHECK(sat.loss_g.item() ==
          doctest::Approx(0.5 * (std::log(0.75) + std::log(0.25))).epsilon(1e-12));
    CHECK(nonsat.loss_g.item() ==
          doctest::Approx(-0.5 * (std::log(0.25) + std::log(0.75))).epsilon(1e-12));
    CHECK(sat.loss_d.item() == doctest::Approx(nonsat.loss_d.item()).epsilon(1e-15));
  }

  SUBCASE("gradient matches finite differences") {
    Rng rng(11);
    DTensor real = drand(rng, {4, 1}, 0.05, 0.95);
    DTensor fake = drand(rng, {4, 1}, 0.05, 0.95);
    auto rv = pn::constant(real);
    auto fv = pn::constant(fake);
    rv.set_requires_grad(true);
    fv.set_requires_grad(true);
    auto out = pg::adversarial_losses<double>(rv, fv);
    auto gs = pn::grad(out.loss_d, {rv, fv});

    auto eval = [&]() {
      return pg::adversarial_losses<double>(pn::constant(real), pn::constant(fake))
          .loss_d.item();
    };
    for (int i = 0; i < 4; ++i) {
      CHECK(gs[0].val().v[i] ==
            doctest::Approx(fd_probe(eval, real.v[i], 1e-6)).epsilon(1e-5));
      CHECK(gs[1].val().v[i] ==
            doctest::Approx(fd_probe(eval, fake.v[i], 1e-6)).epsilon(1e-5));
    }
  }

  SUBCASE("scores outside the open unit interval are rejected") {
    DTensor ok({1, 1});
    ok.v = {0.5};
    DTensor bad({1, 1});
    bad.v = {1.0};
    expect_kind([&] { pg::adversarial_losses<double>(pn::constant(bad), pn::constant(ok)); },
                ErrorKind::DomainError);
    bad.v = {0.0};
    expect_kind([&] { pg::adversarial_losses<double>(pn::constant(ok), pn::constant(bad)); },
                ErrorKind::DomainError);
    bad.v = {-0.3};
    expect_kind([&] { pg::adversarial_losses<double>(pn::constant(bad), pn::constant(ok)); },
                ErrorKind::DomainError);
  }

  SUBCASE("logit form agrees with probability form") {
    Rng rng(12);
    DTensor rl = drand(rng, {5, 1}, -3.0, 3.0);
    DTensor fl = drand(rng, {5, 1}, -3.0, 3.0);
    DTensor rp({5, 1}), fp({5, 1});
    for (int i = 0; i < 5; ++i) {
      rp.v[i] = 1.0 / (1.0 + std::exp(-rl.v[i]));
      fp.v[i] = 1.0 / (1.0 + std::exp(-fl.v[i]));
    }
    auto a = pg::adversarial_losses_logits<double>(pn::constant(rl), pn::constant(fl), true);
    auto b = pg::adversarial_losses<double>(pn::constant(rp), pn::constant(fp), true);
    CHECK(a.loss_d.item() == doctest::Approx(b.loss_d.item()).epsilon(1e-10));
    CHECK(a.loss_g.item() == doctest::Approx(b.loss_g.item()).epsilon(1e-10));
  }

  SUBCASE("empty score sets rejected") {
    DTensor e({0, 1});
    DTensor ok({1, 1});
    ok.v = {0.5};
    expect_kind([&] { pg::adversarial_losses<double>(pn::constant(e), pn::constant(ok)); },
                ErrorKind::EmptyBatch);
  }
}

TEST_CASE("wasserstein losses") {
  SUBCASE("unit separation example") {
    DTensor real({2, 1});
    real.v = {1.0, 1.0};
    DTensor fake({2, 1});
    fake.v = {0.0, 0.0};
    CHECK(pg::wasserstein_critic_loss<double>(pn::constant(real), pn::constant(fake)).item() ==
          doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(std::abs(pg::wasserstein_generator_loss<double>(pn::constant(fake)).item()) <
          1e-15);
  }

  SUBCASE("identical score batches give zero") {
    Rng rng(3);
    DTensor s = drand(rng, {17, 1});
    CHECK(std::abs(
              pg::wasserstein_critic_loss<double>(pn::constant(s), pn::constant(s)).item()) <
          1e-15);
  }

  SUBCASE("agrees with brute-force means on 60-element batches") {
    Rng rng(4);
    DTensor real = drand(rng, {60, 1}, -5.0, 5.0);
    DTensor fake = drand(rng, {60, 1}, -5.0, 5.0);
    double mr = 0.0, mf = 0.0;
    for (int i = 0; i < 60; ++i) {
      mr += real.v[i];
      mf += fake.v[i];
    }
    mr /= 60.0;
    mf /= 60.0;
    CHECK(pg::wasserstein_critic_loss<double>(pn::constant(real), pn::constant(fake)).item() ==
          doctest::Approx(mf - mr).epsilon(1e-12));
    CHECK(pg::wasserstein_generator_loss<double>(pn::constant(fake)).item() ==
          doctest::Approx(-mf).epsilon(1e-12));
  }

  SUBCASE("gradients push scores the right way") {
    DTensor real({2, 1});
    real.v = {0.3, -0.2};
    DTensor fake({2, 1});
    fake.v = {0.1, 0.4};
    auto rv = pn::constant(real);
    auto fv = pn::constant(fake);
    rv.set_requires_grad(true);
    fv.set_requires_grad(true);
    auto loss = pg::wasserstein_critic_loss<double>(rv, fv);
    auto gs = pn::grad(loss, {rv, fv});
    for (double g : gs[0].val().v) CHECK(g == doctest::Approx(-0.5).epsilon(1e-15));
    for (double g : gs[1].val().v) CHECK(g == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("empty batches are rejected") {
    DTensor e({0, 1});
    expect_kind([&] { pg::wasserstein_generator_loss<double>(pn::constant(e)); },
                ErrorKind::EmptyBatch);
  }
}

TEST_CASE("gradient penalty") {
  SUBCASE("sum critic has gradient norm sqrt(d)") {
    // D(x) = sum of pixels, so the gradient is all-ones and its norm is
    // sqrt(d) regardless of the interpolation point.
    for (int d : {1, 4, 16, 25}) {
      auto critic = [&](const DVar& x) {
        return pn::row_sum(pn::reshape(x, {x.shape()[0], d}));
      };
      Rng rng(100 + d);
      DTensor real = drand(rng, {6, 1, 1, d});
      DTensor fake = drand(rng, {6, 1, 1, d});
      Rng gp_rng(55);
      auto gp = pg::gradient_penalty<double>(critic, real, fake, gp_rng, 10.0);
      const double expect = 10.0 * std::pow(std::sqrt(static_cast<double>(d)) - 1.0, 2.0);
      CHECK(gp.item() == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  SUBCASE("doubling critic pays exactly lambda") {
    auto critic = [](const DVar& x) {
      return pn::mul_scalar(pn::reshape(x, {x.shape()[0], 1}), 2.0);
    };
    DTensor real({3, 1, 1, 1});
    real.v = {0.2, -0.4, 0.9};
    DTensor fake({3, 1, 1, 1});
    fake.v = {-0.1, 0.3, 0.5};
    Rng rng(9);
    auto gp = pg::gradient_penalty<double>(critic, real, fake, rng, 10.0);
    CHECK(gp.item() == doctest::Approx(10.0).epsilon(1e-10));
  }

  SUBCASE("penalty gradient matches finite differences on a small critic") {
    Rng rng(21);
    DTensor w1 = drand(rng, {8, 16}, -0.4, 0.4);
    DTensor w2 = drand(rng, {1, 8}, -0.4, 0.4);
    DTensor real = drand(rng, {3, 1, 4, 4});
    DTensor fake = drand(rng, {3, 1, 4, 4});

    auto penalty_with = [&](const DVar& v1, const DVar& v2) {
      auto critic = [&](const DVar& x) {
        auto flat = pn::reshape(x, {x.shape()[0], 16});
        auto h = pn::tanh(pn::matmul(flat, v1, false, true));
        return pn::matmul(h, v2, false, true);
      };
      Rng gp_rng(777);
      return pg::gradient_penalty<double>(critic, real, fake, gp_rng, 10.0);
    };

    auto v1 = pn::constant(w1);
    auto v2 = pn::constant(w2);
    v1.set_requires_grad(true);
    v2.set_requires_grad(true);
    auto gs = pn::grad(penalty_with(v1, v2), {v1, v2});
    auto eval = [&]() { return penalty_with(pn::constant(w1), pn::constant(w2)).item(); };

    for (size_t i = 0; i < w1.v.size(); i += 7) {
      const double fd = fd_probe(eval, w1.v[i], 1e-5);
      CHECK(gs[0].val().v[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
    for (size_t i = 0; i < w2.v.size(); ++i) {
      const double fd = fd_probe(eval, w2.v[i], 1e-5);
      CHECK(gs[1].val().v[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
  }

  SUBCASE("penalty is non-negative") {
    Rng rng(31);
    DTensor w = drand(rng, {1, 9}, -2.0, 2.0);
    auto critic = [&](const DVar& x) {
      return pn::matmul(pn::reshape(x, {x.shape()[0], 9}), pn::constant(w), false, true);
    };
    for (int trial = 0; trial < 20; ++trial) {
      DTensor real = drand(rng, {4, 1, 3, 3});
      DTensor fake = drand(rng, {4, 1, 3, 3});
      Rng gp_rng(1000 + trial);
      CHECK(pg::gradient_penalty<double>(critic, real, fake, gp_rng, 10.0).item() >= 0.0);
    }
  }

  SUBCASE("deterministic per rng seed") {
    Rng rng(41);
    DTensor w = drand(rng, {1, 4}, -1.0, 1.0);
    auto critic = [&](const DVar& x) {
      return pn::tanh(
          pn::matmul(pn::reshape(x, {x.shape()[0], 4}), pn::constant(w), false, true));
    };
    DTensor real = drand(rng, {5, 1, 2, 2});
    DTensor fake = drand(rng, {5, 1, 2, 2});
    Rng r1(88), r2(88), r3(89);
    auto a = pg::gradient_penalty<double>(critic, real, fake, r1, 10.0).item();
    auto b = pg::gradient_penalty<double>(critic, real, fake, r2, 10.0).item();
    auto c = pg::gradient_penalty<double>(critic, real, fake, r3, 10.0).item();
    CHECK(a == b);
    CHECK(a != c);
  }

  SUBCASE("mismatched batches are rejected") {
    auto critic = [](const DVar& x) { return pn::row_sum(pn::reshape(x, {x.shape()[0], 4})); };
    DTensor real({2, 1, 2, 2});
    DTensor fake({3, 1, 2, 2});
    Rng rng(1);
    expect_kind([&] { pg::gradient_penalty<double>(critic, real, fake, rng, 10.0); },
                ErrorKind::ShapeError);
  }
}

TEST_CASE("weight clipping") {
  SUBCASE("worked example") {
    pn::ParamSet<float> ps;
    auto w = ps.add("w", pn::TensorT<float>::zeros({3}));
    w.val_mut().v = {-0.5f, 0.005f, 0.5f};
    pg::clip_weights(ps, 0.01f);
    CHECK(w.val().v == std::vector<float>{-0.01f, 0.005f, 0.01f});
  }

  SUBCASE("in-range weights survive bit-exact and clipping is idempotent") {
    pn::ParamSet<float> ps;
    Rng rng(6);
    pn::TensorT<float> small({64});
    for (auto& v : small.v) v = 0.0099f * static_cast<float>(2.0 * rng.uniform() - 1.0);
    auto w = ps.add("w", small);
    const auto before = w.val().v;
    pg::clip_weights(ps, 0.01f);
    CHECK(w.val().v == before);

    auto w2 = ps.add("w2", pn::normal_init<float>(rng, {1000}, 0.02f));
    pg::clip_weights(ps, 0.01f);
    const auto once = w2.val().v;
    for (float v : once) CHECK(std::abs(v) <= 0.01f);
    pg::clip_weights(ps, 0.01f);
    CHECK(w2.val().v == once);
  }

  SUBCASE("non-positive bound is rejected") {
    pn::ParamSet<float> ps;
    ps.add("w", pn::TensorT<float>::zeros({2}));
    expect_kind([&] { pg::clip_weights(ps, 0.0f); }, ErrorKind::InvalidBound);
    expect_kind([&] { pg::clip_weights(ps, -0.01f); }, ErrorKind::InvalidBound);
  }
}

TEST_CASE("model configs") {
  SUBCASE("validation") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::wgan;
    cfg.image_w = 80;
    cfg.image_h = 160;
    CHECK_NOTHROW(cfg.validate());
    cfg.clip_c = 0.0f;
    expect_kind([&] { cfg.validate(); }, ErrorKind::InvalidBound);
    cfg.clip_c = 0.01f;
    cfg.d_z = 0;
    expect_kind([&] { cfg.validate(); }, ErrorKind::InvalidConfig);
    cfg.d_z = 128;
    cfg.image_w = -4;
    expect_kind([&] { cfg.validate(); }, ErrorKind::InvalidConfig);

    pg::ModelConfig sg;
    sg.kind = pg::ModelKind::stylegan2_lite;
    sg.image_w = 48;
    sg.image_h = 48;
    sg.d_z = 512;
    expect_kind([&] { sg.validate(); }, ErrorKind::InvalidConfig);  // not a power of two
    sg.image_w = 64;
    expect_kind([&] { sg.validate(); }, ErrorKind::InvalidConfig);  // not square
    sg.image_h = 64;
    CHECK_NOTHROW(sg.validate());
    sg.d_z = 128;
    expect_kind([&] { sg.validate(); }, ErrorKind::InvalidConfig);  // latent must be 512
  }

  SUBCASE("kind names round trip") {
    for (auto k : {pg::ModelKind::cgan, pg::ModelKind::wgan, pg::ModelKind::wgan_gp,
                   pg::ModelKind::stylegan2_lite}) {
      CHECK(pg::model_kind_from_string(pg::to_string(k)) == k);
    }
    expect_kind([&] { pg::model_kind_from_string("vae"); }, ErrorKind::InvalidConfig);
  }
}

TEST_CASE("dcgan generator and critic") {
  SUBCASE("conditional generator emits full-resolution images in range") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::cgan;
    cfg.image_w = 320;
    cfg.image_h = 240;
    cfg.d_z = 16;
    cfg.base_ch = 8;
    auto model = pg::GanModel::build(cfg, 123);
    Rng rng(77);
    auto z = pg::sample_latent(rng, 2, cfg.d_z);
    pg::Labels y = {0, 1};
    auto img = model.gen_forward(pn::constant(z), &y, 0);
    CHECK(img.shape() == pn::Shape{2, 1, 240, 320});
    for (float v : img.val().v) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
    auto scores = model.critic_forward(img, &y);
    CHECK(scores.shape() == pn::Shape{2, 1});
  }

  SUBCASE("odd target sizes come out exact") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::wgan_gp;
    cfg.image_w = 80;
    cfg.image_h = 60;
    cfg.d_z = 8;
    cfg.base_ch = 8;
    auto model = pg::GanModel::build(cfg, 1);
    Rng rng(2);
    auto z = pg::sample_latent(rng, 1, cfg.d_z);
    auto img = model.gen_forward(pn::constant(z), nullptr, 0);
    CHECK(img.shape() == pn::Shape{1, 1, 60, 80});
    CHECK(model.critic_forward(img, nullptr).shape() == pn::Shape{1, 1});
  }

  SUBCASE("forward is a deterministic function of z and y") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::cgan;
    cfg.image_w = 64;
    cfg.image_h = 64;
    cfg.d_z = 8;
    cfg.base_ch = 8;
    auto model = pg::GanModel::build(cfg, 5);
    Rng rng(6);
    auto z = pg::sample_latent(rng, 2, cfg.d_z);
    pg::Labels y = {1, 0};
    auto a = model.gen_forward(pn::constant(z), &y, 0);
    auto b = model.gen_forward(pn::constant(z), &y, 0);
    CHECK(a.val().v == b.val().v);

    pg::Labels flipped = {0, 1};
    auto c = model.gen_forward(pn::constant(z), &flipped, 0);
    double diff = 0.0;
    for (size_t i = 0; i < c.val().v.size(); ++i)
      diff += std::abs(static_cast<double>(c.val().v[i]) - a.val().v[i]);
    CHECK(diff / static_cast<double>(c.val().v.size()) > 0.0);
  }

  SUBCASE("conditioning errors") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::cgan;
    cfg.image_w = 32;
    cfg.image_h = 32;
    cfg.d_z = 8;
    cfg.base_ch = 8;
    auto model = pg::GanModel::build(cfg, 9);
    Rng rng(10);
    auto z = pg::sample_latent(rng, 2, cfg.d_z);
    expect_kind([&] { model.gen_forward(pn::constant(z), nullptr, 0); },
                ErrorKind::ConditioningError);
    pg::Labels short_y = {1};
    expect_kind([&] { model.gen_forward(pn::constant(z), &short_y, 0); },
                ErrorKind::ConditioningError);
    pg::Labels bad_y = {1, 2};
    expect_kind([&] { model.gen_forward(pn::constant(z), &bad_y, 0); },
                ErrorKind::ConditioningError);

    pg::ModelConfig un = cfg;
    un.kind = pg::ModelKind::wgan;
    auto plain = pg::GanModel::build(un, 9);
    pg::Labels y = {0, 1};
    expect_kind([&] { plain.gen_forward(pn::constant(z), &y, 0); },
                ErrorKind::ConditioningError);
  }

  SUBCASE("critic rejects wrong image geometry") {
    pg::ModelConfig cfg;
    cfg.kind = pg::ModelKind::wgan;
    cfg.image_w = 64;
    cfg.image_h = 64;
    cfg.d_z = 8;
    cfg.base_ch = 8;
    auto model = pg::GanModel::build(cfg, 3);
    auto bad = pn::constant(pn::TensorT<float>::zeros({1, 1, 32, 32}));
    expect_kind([&] { model.critic_forward(bad, nullptr); }, ErrorKind::ShapeError);
  }
}

TEST_CASE("style generator") {
  pg::ModelConfig cfg;
  cfg.kind = pg::ModelKind::stylegan2_lite;
  cfg.image_w = 32;
  cfg.image_h = 32;
  cfg.d_z = 512;
  cfg.base_ch = 8;

  SUBCASE("mapping network is eight affine layers on 512-wide vectors") {
    auto model = pg::GanModel::build(cfg, 17);
    auto desc = model.describe();
    CHECK(desc.mapping_affine_layers == 8);
    CHECK(model.style->mapping_layer_count() == 8);
    Rng rng(18);
    auto z = pg::sample_latent(rng, 3, 512);
    auto w = model.style->mapping_forward(pn::constant(z));
    CHECK(w.shape() == pn::Shape{3, 512});

    auto z2 = pg::sample_latent(rng, 3, 512);
    auto w2 = model.style->mapping_forward(pn::constant(z2));
    CHECK(w.val().v != w2.val().v);

    auto bad = pn::constant(pn::TensorT<float>::zeros({3, 128}));
    expect_kind([&] { model.style->mapping_forward(bad); }, ErrorKind::ShapeError);
  }

  SUBCASE("zeroed mapping weights leave only the final bias path") {
    auto model = pg::GanModel::build(cfg, 19);
    auto& ps = model.gen_params();
    for (size_t i = 0; i < ps.names.size(); ++i) {
      if (ps.names[i].rfind("g.map.fc", 0) != 0) continue;
      auto& t = ps.vars[i].val_mut();
      if (ps.names[i].back() == 'w') {
        std::fill(t.v.begin(), t.v.end(), 0.0f);
      } else {
        for (size_t j = 0; j < t.v.size(); ++j) t.v[j] = (j % 2 == 0) ? 0.5f : -0.5f;
      }
    }
    // With the affine weights zeroed every layer reduces to lrelu(bias),
    // so w is fully determined by the last layer's bias vector.
    Rng rng(20);
    auto z = pg::sample_latent(rng, 2, 512);
    auto w = model.style->mapping_forward(pn::constant(z));
    for (int n = 0; n < 2; ++n) {
      for (int j = 0; j < 512; ++j) {
        const float expect = (j % 2 == 0) ? 0.5f : -0.1f;
        CHECK(w.val().v[static_cast<size_t>(n) * 512 + j] ==
              doctest::Approx(expect).epsilon(1e-6));
      }
    }
  }

  SUBCASE("synthesis output shape, range and determinism") {
    auto model = pg::GanModel::build(cfg, 21);
    // Noise strengths start at zero; give them weight so the per-seed noise
    // actually reaches the image.
    auto& ps = model.gen_params();
    for (size_t i = 0; i < ps.names.size(); ++i)
      if (ps.names[i].find(".noise") != std::string::npos)
        std::fill(ps.vars[i].val_mut().v.begin(), ps.vars[i].val_mut().v.end(), 0.1f);
    Rng rng(22);
    auto z = pg::sample_latent(rng, 2, 512);
    auto a = model.gen_forward(pn::constant(z), nullptr, 99);
    CHECK(a.shape() == pn::Shape{2, 1, 32, 32});
    for (float v : a.val().v) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
    auto b = model.gen_forward(pn::constant(z), nullptr, 99);
    CHECK(a.val().v == b.val().v);
    auto c = model.gen_forward(pn::constant(z), nullptr, 100);
    CHECK(a.val().v != c.val().v);
  }

  SUBCASE("labels are rejected") {
    auto model = pg::GanModel::build(cfg, 23);
    Rng rng(24);
    auto z = pg::sample_latent(rng, 1, 512);
    pg::Labels y = {0};
    expect_kind([&] { model.gen_forward(pn::constant(z), &y, 0); },
                ErrorKind::ConditioningError);
  }
}

TEST_CASE("architecture descriptors") {
  pg::ModelConfig cfg;
  cfg.kind = pg::ModelKind::wgan_gp;
  cfg.image_w = 80;
  cfg.image_h = 160;
  cfg.d_z = 128;
  cfg.base_ch = 16;
  auto model = pg::GanModel::build(cfg, 30);
  auto desc = model.describe();
  CHECK(desc.kind == "wgan_gp");
  CHECK(desc.image_w == 80);
  CHECK(desc.image_h == 160);
  CHECK(!desc.conditional);
  CHECK(desc.mapping_affine_layers == 0);
  CHECK(desc.generator_tensors.size() == model.gen_params().names.size());
  CHECK(desc.critic_tensors.size() == model.critic_params().names.size());
  CHECK(desc.generator_param_count > 0);
  CHECK(desc.critic_param_count > 0);
  int64_t total = 0;
  for (const auto& li : desc.generator_tensors) total += pn::shape_numel(li.shape);
  CHECK(total == desc.generator_param_count);
}

TEST_CASE("checkpoint archive") {
  pg::ModelConfig cfg;
  cfg.kind = pg::ModelKind::cgan;
  cfg.image_w = 32;
  cfg.image_h = 32;
  cfg.d_z = 8;
  cfg.base_ch = 8;

  SUBCASE("round trip preserves weights bit-exact") {
    auto model = pg::GanModel::build(cfg, 40);
    pg::CheckpointMeta meta;
    meta.kimg = 12.5;
    meta.rng_state = "feedface01234567";
    meta.config_hash = "abc123";
    auto path = temp_file("roundtrip.bin");
    pg::save_checkpoint(path.string(), model, meta);

    auto loaded = pg::load_checkpoint(path.string());
    CHECK(loaded.meta.kimg == doctest::Approx(12.5));
    CHECK(loaded.meta.rng_state == "feedface01234567");
    CHECK(loaded.meta.config_hash == "abc123");
    CHECK(loaded.model.cfg.kind == pg::ModelKind::cgan);

    auto& a = model.gen_params();
    auto& b = loaded.model.gen_params();
    REQUIRE(a.names.size() == b.names.size());
    for (size_t i = 0; i < a.names.size(); ++i) {
      CHECK(a.names[i] == b.names[i]);
      CHECK(a.vars[i].val().v == b.vars[i].val().v);
    }

    Rng rng(41);
    auto z = pg::sample_latent(rng, 2, cfg.d_z);
    pg::Labels y = {0, 1};
    auto ia = model.gen_forward(pn::constant(z), &y, 0);
    auto ib = loaded.model.gen_forward(pn::constant(z), &y, 0);
    CHECK(ia.val().v == ib.val().v);
    std::filesystem::remove(path);
  }

  SUBCASE("corruption is detected") {
    auto model = pg::GanModel::build(cfg, 42);
    pg::CheckpointMeta meta;
    auto path = temp_file("corrupt.bin");
    pg::save_checkpoint(path.string(), model, meta);

    std::vector<char> bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    REQUIRE(bytes.size() > 200);
    bytes[bytes.size() / 2] ^= 0x40;
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    expect_kind([&] { pg::load_checkpoint(path.string()); }, ErrorKind::ChecksumError);

    bytes[bytes.size() / 2] ^= 0x40;
    bytes.resize(bytes.size() - 16);
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    expect_kind([&] { pg::load_checkpoint(path.string()); }, ErrorKind::ChecksumError);
    std::filesystem::remove(path);
  }

  SUBCASE("missing file") {
    expect_kind([&] { pg::load_checkpoint("/nonexistent/periogan/ckpt.bin"); },
                ErrorKind::IOFailure);
  }
}
