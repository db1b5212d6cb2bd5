// Microbenchmarks for the paths that dominate wall time: the GAN
// forward/backward passes, FID (embedding plus the matrix square root),
// the DET sweep, and sharpness. Run manually:
//   ./build/benchmarks/bench_core [--benchmark_filter=...]

#include <cmath>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "periogan/corpus/pixel.hpp"
#include "periogan/ganzoo/losses.hpp"
#include "periogan/ganzoo/models.hpp"
#include "periogan/nn/autograd.hpp"
#include "periogan/nn/ops.hpp"
#include "periogan/padlab/metrics.hpp"
#include "periogan/quality/embed.hpp"
#include "periogan/quality/fid.hpp"
#include "periogan/quality/sharpness.hpp"
#include "periogan/util/rng.hpp"

namespace {

using namespace periogan;

ganzoo::ModelConfig toy_model(ganzoo::ModelKind kind, int size) {
  ganzoo::ModelConfig cfg;
  cfg.kind = kind;
  cfg.image_w = cfg.image_h = size;
  cfg.d_z = kind == ganzoo::ModelKind::stylegan2_lite ? 512 : 64;
  cfg.base_ch = 16;
  return cfg;
}

std::vector<corpus::PixelTensor> noise_images(int n, int size, uint64_t seed) {
  Rng rng(seed);
  std::vector<corpus::PixelTensor> out(n);
  for (auto& img : out) {
    img.width = img.height = size;
    img.v.resize(static_cast<size_t>(size) * size);
    for (auto& v : img.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return out;
}

void BM_GeneratorForward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  auto model = ganzoo::GanModel::build(toy_model(ganzoo::ModelKind::wgan_gp, 32), 1);
  Rng rng(2);
  for (auto _ : state) {
    auto guard = nn::no_grad_guard();
    nn::FVar z = nn::constant(ganzoo::sample_latent(rng, batch, 64));
    benchmark::DoNotOptimize(model.gen_forward(z, nullptr, 0).val().v.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(16)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  auto model = ganzoo::GanModel::build(toy_model(ganzoo::ModelKind::wgan_gp, 32), 1);
  Rng rng(3);
  nn::Tensor real({batch, 1, 32, 32});
  for (auto& v : real.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    nn::FVar z = nn::constant(ganzoo::sample_latent(rng, batch, 64));
    nn::FVar fake = model.gen_forward(z, nullptr, 0);
    nn::FVar d_real = model.critic_forward(nn::constant(real), nullptr);
    nn::FVar d_fake = model.critic_forward(fake, nullptr);
    nn::FVar loss = ganzoo::wasserstein_critic_loss(d_real, d_fake);
    model.critic_params().zero_grad();
    nn::backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GradientPenalty(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  auto model = ganzoo::GanModel::build(toy_model(ganzoo::ModelKind::wgan_gp, 32), 1);
  Rng rng(4);
  nn::Tensor real({batch, 1, 32, 32}), fake({batch, 1, 32, 32});
  for (auto& v : real.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : fake.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const std::function<nn::FVar(const nn::FVar&)> critic = [&](const nn::FVar& x) {
    return model.critic_forward(x, nullptr);
  };
  for (auto _ : state) {
    nn::FVar gp = ganzoo::gradient_penalty<float>(critic, real, fake, rng, 10.f);
    model.critic_params().zero_grad();
    nn::backward(gp);
    benchmark::DoNotOptimize(gp.item());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_GradientPenalty)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Embed(benchmark::State& state, const std::string& id) {
  const auto emb = quality::Embedder::make(id);
  const auto images = noise_images(32, 64, 11);
  for (auto _ : state) {
    Eigen::MatrixXd f = emb.embed(images);
    benchmark::DoNotOptimize(f.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(images.size()));
}
BENCHMARK_CAPTURE(BM_Embed, tiny2048, "tiny2048")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Embed, pixstat64, "pixstat64");

void BM_FrechetDistance(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(12);
  Eigen::MatrixXd a(4 * d, d), b(4 * d, d);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < d; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal(0.3, 1.1);
    }
  const auto sa = quality::gaussian_summary(a);
  const auto sb = quality::gaussian_summary(b);
  for (auto _ : state) benchmark::DoNotOptimize(quality::frechet_distance(sa, sb));
}
BENCHMARK(BM_FrechetDistance)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_DetCurve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(13);
  std::vector<padlab::PADScore> scores;
  scores.reserve(2 * static_cast<size_t>(n));
  auto squash = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int i = 0; i < n; ++i) {
    scores.push_back({"a" + std::to_string(i), padlab::GroundTruth::attack,
                      squash(rng.normal())});
    scores.push_back({"b" + std::to_string(i), padlab::GroundTruth::bonafide,
                      squash(rng.normal(1.5, 1.0))});
  }
  for (auto _ : state) {
    auto curve = padlab::det_curve(scores);
    benchmark::DoNotOptimize(padlab::d_eer(curve).eer);
  }
  state.SetItemsProcessed(state.iterations() * 2 * n);
}
BENCHMARK(BM_DetCurve)->Arg(1000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_Sharpness(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto img = noise_images(1, size, 14)[0];
  for (auto _ : state) benchmark::DoNotOptimize(quality::sharpness(img));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Sharpness)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
