#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <periogan/quality/embed.hpp>
#include <periogan/quality/fid.hpp>
#include <periogan/quality/sharpness.hpp>
#include <periogan/quality/tsne.hpp>
#include <periogan/util/error.hpp>
#include <periogan/util/rng.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace pq = periogan::quality;
using periogan::Error;
using periogan::ErrorKind;
using periogan::Rng;
using periogan::corpus::PixelTensor;

namespace {

template <class F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL_CHECK("expected an error of kind " << periogan::to_string(kind));
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

PixelTensor noise_image(Rng& rng, int w, int h, float amp = 1.0f) {
  PixelTensor img;
  img.width = w;
  img.height = h;
  img.v.resize(static_cast<size_t>(w) * h);
  for (auto& v : img.v) v = amp * static_cast<float>(2.0 * rng.uniform() - 1.0);
  return img;
}

PixelTensor smooth_image(Rng& rng, int w, int h) {
  PixelTensor img;
  img.width = w;
  img.height = h;
  img.v.resize(static_cast<size_t>(w) * h);
  const double fx = 1.0 + 4.0 * rng.uniform();
  const double fy = 1.0 + 4.0 * rng.uniform();
  const double ph = 6.28 * rng.uniform();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.v[static_cast<size_t>(y) * w + x] = static_cast<float>(
          0.7 * std::sin(fx * x / w * 6.28318 + ph) * std::cos(fy * y / h * 6.28318));
  return img;
}

PixelTensor add_noise(const PixelTensor& img, Rng& rng, double sigma) {
  PixelTensor out = img;
  for (auto& v : out.v)
    v = std::clamp(v + static_cast<float>(rng.normal(0.0, sigma)), -1.0f, 1.0f);
  return out;
}

// 5x5 binomial blur with clamped edges.
PixelTensor blur(const PixelTensor& img) {
  static const double k[5] = {1, 4, 6, 4, 1};
  PixelTensor tmp = img, out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        const int xx = std::clamp(x + i, 0, img.width - 1);
        acc += k[i + 2] * img.v[static_cast<size_t>(y) * img.width + xx];
      }
      tmp.v[static_cast<size_t>(y) * img.width + x] = static_cast<float>(acc / 16.0);
    }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        const int yy = std::clamp(y + i, 0, img.height - 1);
        acc += k[i + 2] * tmp.v[static_cast<size_t>(yy) * img.width + x];
      }
      out.v[static_cast<size_t>(y) * img.width + x] = static_cast<float>(acc / 16.0);
    }
  return out;
}

// Samples n rows from N(mu, A A^T).
Eigen::MatrixXd gaussian_sample(Rng& rng, int n, const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& a) {
  const int d = static_cast<int>(mu.size());
  Eigen::MatrixXd z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.normal();
  return (z * a.transpose()).rowwise() + mu.transpose();
}

}  // namespace

TEST_CASE("embedders") {
  SUBCASE("tiny2048 shape, order and determinism") {
    auto model = pq::Embedder::make("tiny2048");
    CHECK(model.descriptor().d_f == 2048);
    CHECK(model.descriptor().id == "tiny2048");

    Rng rng(1);
    std::vector<PixelTensor> imgs;
    for (int i = 0; i < 100; ++i) imgs.push_back(noise_image(rng, 40, 30));
    auto f = model.embed(imgs);
    CHECK(f.rows() == 100);
    CHECK(f.cols() == 2048);
    CHECK(f.allFinite());

    // duplicate inputs embed to identical rows
    std::vector<PixelTensor> dup = {imgs[3], imgs[7], imgs[3]};
    auto fd = model.embed(dup);
    CHECK(fd.row(0) == fd.row(2));
    CHECK(fd.row(0) != fd.row(1));

    // a fresh instance is the same function
    auto again = pq::Embedder::make("tiny2048");
    auto f2 = again.embed({imgs[0]});
    CHECK(f2.row(0) == f.row(0));
  }

  SUBCASE("pixstat64 is the 8x8 thumbnail") {
    auto model = pq::Embedder::make("pixstat64");
    CHECK(model.descriptor().d_f == 64);
    Rng rng(2);
    auto img = noise_image(rng, 8, 8);
    auto f = model.embed({img});
    REQUIRE(f.cols() == 64);
    for (int j = 0; j < 64; ++j)
      CHECK(f(0, j) == doctest::Approx(img.v[static_cast<size_t>(j)]).epsilon(1e-7));
  }

  SUBCASE("unavailable and unknown embedders") {
    expect_kind([] { pq::Embedder::make("inception-v3-pool3"); }, ErrorKind::EmbedError);
    expect_kind([] { pq::Embedder::make("vgg"); }, ErrorKind::EmbedError);
    auto model = pq::Embedder::make("pixstat64");
    expect_kind([&] { model.embed({}); }, ErrorKind::EmbedError);
  }
}

TEST_CASE("gaussian summaries") {
  SUBCASE("hand-computed unbiased covariance") {
    Eigen::MatrixXd f(2, 2);
    f << 0, 0, 2, 2;
    auto s = pq::gaussian_summary(f);
    CHECK(s.n == 2);
    CHECK(s.u(0) == doctest::Approx(1.0));
    CHECK(s.u(1) == doctest::Approx(1.0));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(s.sigma(i, j) == doctest::Approx(2.0));
  }

  SUBCASE("identical rows give zero covariance") {
    Eigen::MatrixXd f(5, 3);
    for (int i = 0; i < 5; ++i) f.row(i) << 1.5, -2.0, 0.25;
    auto s = pq::gaussian_summary(f);
    CHECK(s.sigma.norm() == doctest::Approx(0.0).scale(1.0));
  }

  SUBCASE("symmetry is enforced") {
    Rng rng(3);
    Eigen::MatrixXd f(40, 6);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 6; ++j) f(i, j) = rng.normal();
    auto s = pq::gaussian_summary(f);
    CHECK((s.sigma - s.sigma.transpose()).norm() < 1e-10);
  }

  SUBCASE("single row rejected") {
    Eigen::MatrixXd f(1, 4);
    f.setZero();
    expect_kind([&] { pq::gaussian_summary(f); }, ErrorKind::InsufficientSamples);
  }
}

TEST_CASE("frechet distance") {
  SUBCASE("univariate closed form") {
    pq::GaussianSummary a, b;
    a.u = Eigen::VectorXd::Zero(1);
    a.sigma = Eigen::MatrixXd::Identity(1, 1);
    a.n = 100;
    b = a;
    b.u(0) = 1.0;
    CHECK(pq::frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-10));
    b.sigma(0, 0) = 4.0;  // (mu diff)^2 + (2-1)^2 = 2
    CHECK(pq::frechet_distance(a, b) == doctest::Approx(2.0).epsilon(1e-10));
  }

  SUBCASE("diagonal closed form matches the eigendecomposition path") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 8;
      pq::GaussianSummary a, b;
      a.u = Eigen::VectorXd(d);
      b.u = Eigen::VectorXd(d);
      a.sigma = Eigen::MatrixXd::Zero(d, d);
      b.sigma = Eigen::MatrixXd::Zero(d, d);
      a.n = b.n = 10;
      double expect = 0.0;
      for (int i = 0; i < d; ++i) {
        a.u(i) = rng.normal();
        b.u(i) = rng.normal();
        const double sa = 0.1 + 3.0 * rng.uniform();
        const double sb = 0.1 + 3.0 * rng.uniform();
        a.sigma(i, i) = sa;
        b.sigma(i, i) = sb;
        expect += (a.u(i) - b.u(i)) * (a.u(i) - b.u(i));
        expect += (std::sqrt(sa) - std::sqrt(sb)) * (std::sqrt(sa) - std::sqrt(sb));
      }
      CHECK(pq::frechet_distance(a, b) == doctest::Approx(expect).epsilon(1e-8));
    }
  }

  SUBCASE("symmetry and self-distance zero on random PSD summaries") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
      const int d = 2 + static_cast<int>(rng.below(31));
      Eigen::MatrixXd m(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
      pq::GaussianSummary a;
      a.u = Eigen::VectorXd(d);
      for (int i = 0; i < d; ++i) a.u(i) = rng.normal();
      a.sigma = m * m.transpose();
      a.n = 10;

      Eigen::MatrixXd m2(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m2(i, j) = rng.normal();
      pq::GaussianSummary b;
      b.u = Eigen::VectorXd(d);
      for (int i = 0; i < d; ++i) b.u(i) = rng.normal();
      b.sigma = m2 * m2.transpose();
      b.n = 10;

      CHECK(std::abs(pq::frechet_distance(a, a)) < 1e-8);
      CHECK(std::abs(pq::frechet_distance(a, b) - pq::frechet_distance(b, a)) < 1e-8);
      CHECK(pq::frechet_distance(a, b) >= 0.0);
    }
  }

  SUBCASE("known 4-D Gaussians") {
    Rng rng(6);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(4);
    Eigen::MatrixXd a(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a(i, j) = 0.3 * rng.normal();
    a += Eigen::MatrixXd::Identity(4, 4);

    auto s1 = pq::gaussian_summary(gaussian_sample(rng, 10000, mu, a));
    auto s2 = pq::gaussian_summary(gaussian_sample(rng, 10000, mu, a));
    CHECK(pq::frechet_distance(s1, s2) < 0.05);

    Eigen::VectorXd mu2 = mu;
    mu2(0) += 2.0;  // ||dmu||^2 = 4
    auto s3 = pq::gaussian_summary(gaussian_sample(rng, 10000, mu2, a));
    const double fd = pq::frechet_distance(s1, s3);
    CHECK(fd > 4.0 * 0.95);
    CHECK(fd < 4.0 * 1.05);
  }

  SUBCASE("dimension mismatch") {
    pq::GaussianSummary a, b;
    a.u = Eigen::VectorXd::Zero(3);
    a.sigma = Eigen::MatrixXd::Identity(3, 3);
    b.u = Eigen::VectorXd::Zero(4);
    b.sigma = Eigen::MatrixXd::Identity(4, 4);
    expect_kind([&] { pq::frechet_distance(a, b); }, ErrorKind::ShapeError);
  }
}

TEST_CASE("fid reports") {
  Rng rng(7);
  std::vector<PixelTensor> base;
  for (int i = 0; i < 200; ++i) base.push_back(smooth_image(rng, 16, 16));
  auto model = pq::Embedder::make("pixstat64");

  SUBCASE("identical sets score ~0") {
    auto r = pq::fid(base, base, model);
    CHECK(r.fid < 1e-6);
    CHECK(r.embedder_id == "pixstat64");
    CHECK(r.n_a == 200);
    CHECK(r.n_b == 200);
    CHECK(r.small_sample_warning);
  }

  SUBCASE("fid grows with corruption strength") {
    Rng nrng(8);
    std::vector<PixelTensor> light, heavy;
    for (const auto& img : base) light.push_back(add_noise(img, nrng, 0.02));
    for (const auto& img : base) heavy.push_back(add_noise(img, nrng, 0.2));
    const double f_light = pq::fid(base, light, model).fid;
    const double f_heavy = pq::fid(base, heavy, model).fid;
    CHECK(f_heavy > f_light);
    CHECK(f_light >= 0.0);
  }

  SUBCASE("serialization") {
    auto r = pq::fid(base, base, model);
    auto j = pq::fid_report_json(r);
    CHECK(j.find("\"embedder_id\": \"pixstat64\"") != std::string::npos);
    auto c = pq::fid_report_csv(r);
    CHECK(c.rfind("fid,fid_preclamp,embedder_id", 0) == 0);
  }

  SUBCASE("undersized sets rejected") {
    std::vector<PixelTensor> one = {base[0]};
    expect_kind([&] { pq::fid(one, base, model); }, ErrorKind::InsufficientSamples);
  }
}

TEST_CASE("sharpness") {
  SUBCASE("constant image scores exactly zero") {
    PixelTensor img;
    img.width = 32;
    img.height = 32;
    img.v.assign(32 * 32, 0.37f);
    CHECK(pq::sharpness(img) == 0.0);
  }

  SUBCASE("blur strictly reduces sharpness of noise") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      auto img = noise_image(rng, 24, 24, 0.8f);
      const double s = pq::sharpness(img);
      const double sb = pq::sharpness(blur(img));
      CHECK(s > 0.0);
      CHECK(sb < s);
    }
  }

  SUBCASE("constant offset cannot change the score") {
    Rng rng(10);
    PixelTensor img;
    img.width = 64;
    img.height = 64;
    img.v.resize(64 * 64);
    // pixels are multiples of 2^-10 in [-0.5, 0.25], so +0.25 is exact in
    // float and the score must match bit for bit
    for (auto& v : img.v)
      v = static_cast<float>(static_cast<int>(rng.below(769)) - 512) / 1024.0f;
    PixelTensor shifted = img;
    for (auto& v : shifted.v) v += 0.25f;
    CHECK(pq::sharpness(shifted) == pq::sharpness(img));
  }

  SUBCASE("quadratic in contrast") {
    Rng rng(11);
    auto img = noise_image(rng, 20, 20, 0.4f);
    PixelTensor doubled = img;
    for (auto& v : doubled.v) v *= 2.0f;
    CHECK(pq::sharpness(doubled) == doctest::Approx(4.0 * pq::sharpness(img)).epsilon(1e-12));
  }

  SUBCASE("images smaller than the kernel score zero") {
    Rng rng(12);
    auto img = noise_image(rng, 8, 8);
    CHECK(pq::sharpness(img) == 0.0);
  }
}

TEST_CASE("tsne") {
  SUBCASE("recovers two separated clusters") {
    Rng rng(13);
    const int per = 100, d = 10;
    Eigen::MatrixXd f(2 * per, d);
    std::vector<std::string> labels;
    for (int i = 0; i < 2 * per; ++i) {
      const bool second = i >= per;
      for (int j = 0; j < d; ++j)
        f(i, j) = rng.normal() + (second && j == 0 ? 20.0 : 0.0);
      labels.push_back(second ? "b" : "a");
    }
    pq::TsneParams params;
    params.iterations = 600;
    params.seed = 99;
    auto map = pq::tsne_project(f, labels, params);
    REQUIRE(map.points.rows() == 2 * per);
    CHECK(map.points.allFinite());

    // mean silhouette over the true clustering
    auto dist = [&](int i, int j) { return (map.points.row(i) - map.points.row(j)).norm(); };
    double sil = 0.0;
    for (int i = 0; i < 2 * per; ++i) {
      double intra = 0.0, inter = 0.0;
      for (int j = 0; j < 2 * per; ++j) {
        if (j == i) continue;
        if ((i < per) == (j < per))
          intra += dist(i, j);
        else
          inter += dist(i, j);
      }
      intra /= per - 1;
      inter /= per;
      sil += (inter - intra) / std::max(intra, inter);
    }
    sil /= 2 * per;
    CHECK(sil > 0.5);

    // KL never increases once exaggeration ends
    for (size_t i = 1; i < map.kl_history.size(); ++i)
      CHECK(map.kl_history[i] <= map.kl_history[i - 1]);
    CHECK(map.final_kl == map.kl_history.back());
  }

  SUBCASE("same seed, same map") {
    Rng rng(14);
    Eigen::MatrixXd f(95, 4);
    for (int i = 0; i < f.rows(); ++i)
      for (int j = 0; j < 4; ++j) f(i, j) = rng.normal();
    pq::TsneParams params;
    params.iterations = 300;
    params.seed = 7;
    auto a = pq::tsne_project(f, {}, params);
    auto b = pq::tsne_project(f, {}, params);
    CHECK(a.points == b.points);
    params.seed = 8;
    auto c = pq::tsne_project(f, {}, params);
    CHECK(a.points != c.points);
  }

  SUBCASE("perplexity precondition") {
    Eigen::MatrixXd f(10, 3);
    f.setRandom();
    expect_kind([&] { pq::tsne_project(f, {}, {}); }, ErrorKind::InvalidPerplexity);
    pq::TsneParams params;
    params.perplexity = -1.0;
    expect_kind([&] { pq::tsne_project(f, {}, params); }, ErrorKind::InvalidPerplexity);
  }

  SUBCASE("label count must match") {
    Eigen::MatrixXd f(95, 3);
    f.setRandom();
    expect_kind([&] { pq::tsne_project(f, {"a", "b"}, {}); }, ErrorKind::ShapeError);
  }

  SUBCASE("csv export") {
    Rng rng(15);
    Eigen::MatrixXd f(95, 3);
    for (int i = 0; i < f.rows(); ++i)
      for (int j = 0; j < 3; ++j) f(i, j) = rng.normal();
    std::vector<std::string> labels(95, "bonafide");
    pq::TsneParams params;
    params.iterations = 60;
    auto map = pq::tsne_project(f, labels, params);
    auto csv = pq::projection_csv(map);
    CHECK(csv.rfind("x,y,label\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 96);
    CHECK(csv.find("bonafide") != std::string::npos);
  }
}
