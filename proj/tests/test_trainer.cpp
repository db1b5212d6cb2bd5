#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <periogan/corpus/pixel.hpp>
#include <periogan/trainer/trainer.hpp>
#include <periogan/util/csvio.hpp>
#include <periogan/util/error.hpp>
#include <periogan/util/rng.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
namespace pt = periogan::trainer;
namespace pc = periogan::corpus;
using periogan::Error;
using periogan::ErrorKind;
using periogan::Rng;
using pg_kind = periogan::ganzoo::ModelKind;

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

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() /
             ("periogan_trainer_" + std::to_string(::getpid())) / tag;
  fs::create_directories(dir);
  return dir;
}

/// Smooth gradient blobs; enough structure for the embedder to tell real
/// batches from an untrained generator's output.
pc::PixelTensor toy_image(Rng& rng, int w, int h) {
  pc::PixelTensor img(h, w);
  const double fx = 1.0 + 2.0 * rng.uniform();
  const double fy = 1.0 + 2.0 * rng.uniform();
  const double ph = 6.28 * rng.uniform();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(y, x) = static_cast<float>(0.7 * std::sin(fx * x / double(w) * 6.283 + ph) *
                                        std::cos(fy * y / double(h) * 3.141));
  return img;
}

pc::Manifest toy_corpus(const std::string& tag, int n, int w, int h) {
  auto dir = temp_dir(tag);
  Rng rng(91 + n);
  pc::Manifest m;
  m.source_width = w;
  m.source_height = h;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%03d.png", i);
    const std::string path = (dir / name).string();
    pc::save_image(path, toy_image(rng, w, h));
    pc::ImageRecord rec;
    rec.id = name;
    rec.path = path;
    rec.width = w;
    rec.height = h;
    rec.gender = i % 2 == 0 ? pc::Gender::female : pc::Gender::male;
    m.records.push_back(rec);
  }
  m.checksum = pc::manifest_checksum(m.records);
  return m;
}

pt::TrainConfig toy_config(pg_kind kind) {
  pt::TrainConfig cfg;
  cfg.model_kind = kind;
  cfg.image_w = 16;
  cfg.image_h = 16;
  cfg.learning_rate = kind == pg_kind::wgan ? 5e-5 : 1e-4;
  cfg.optimizer = kind == pg_kind::wgan ? pt::Optimizer::rmsprop : pt::Optimizer::adam;
  cfg.batch_size = 12;
  cfg.budget = 0.24;
  cfg.budget_unit = pt::BudgetUnit::kimg;
  cfg.eval_every_kimg = 0.12;
  cfg.seed = 11;
  cfg.d_z = 16;
  cfg.base_ch = 8;
  cfg.fid_samples = 16;
  cfg.sample_grid = 2;
  return cfg;
}

}  // namespace

TEST_CASE("train config validation") {
  auto cfg = toy_config(pg_kind::wgan_gp);
  CHECK_NOTHROW(cfg.validate());

  auto bad = cfg;
  bad.budget = 0.0;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);
  bad = cfg;
  bad.learning_rate = -1e-4;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);
  bad = cfg;
  bad.batch_size = 0;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);
  bad = cfg;
  bad.lambda_gp = 0.0;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);

  // the paper pairs wgan with rmsprop; everything else trains with adam
  bad = toy_config(pg_kind::wgan);
  bad.optimizer = pt::Optimizer::adam;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);
  bad = toy_config(pg_kind::wgan_gp);
  bad.optimizer = pt::Optimizer::rmsprop;
  expect_kind([&] { bad.validate(); }, ErrorKind::InvalidConfig);
}

TEST_CASE("train config json round trip") {
  auto cfg = toy_config(pg_kind::wgan_gp);
  const std::string text = cfg.to_json();
  auto back = pt::TrainConfig::from_json(text);
  CHECK(back.to_json() == text);
  CHECK(back.hash() == cfg.hash());
  CHECK(back.model_kind == cfg.model_kind);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.seed == cfg.seed);

  auto other = cfg;
  other.seed = 12;
  CHECK(other.hash() != cfg.hash());

  expect_kind([] { pt::TrainConfig::from_json("{\"lr\": 1}"); },
              ErrorKind::InvalidConfig);
  expect_kind([] { pt::TrainConfig::from_json("{\"batch_size\": \"sixty\"}"); },
              ErrorKind::InvalidConfig);
  expect_kind([] { pt::TrainConfig::from_json("not json"); }, ErrorKind::InvalidConfig);
  expect_kind([] { pt::TrainConfig::from_json("[1,2]"); }, ErrorKind::InvalidConfig);
}

TEST_CASE("wgan-gp toy run") {
  auto manifest = toy_corpus("wgangp_corpus", 60, 16, 16);
  auto cfg = toy_config(pg_kind::wgan_gp);
  const auto dir = temp_dir("wgangp_run");

  auto log = pt::train(cfg, manifest, dir.string());

  // 0.24 kimg at batch 12 = 20 critic steps = 4 generator blocks
  REQUIRE(log.rows.size() == 5);
  CHECK(log.final_kimg == 20 * 12 / 1000.0);
  CHECK(log.rows.front().kimg == 0.0);
  CHECK(log.rows.front().has_fid);
  for (size_t i = 0; i < log.rows.size(); ++i) {
    CHECK(std::isfinite(log.rows[i].loss_d));
    CHECK(std::isfinite(log.rows[i].loss_g));
    if (i > 0) CHECK(log.rows[i].kimg > log.rows[i - 1].kimg);
  }

  // evals at 0, 0.12 and the final 0.24; each one persisted a checkpoint
  std::vector<double> fid_kimgs;
  for (const auto& r : log.rows)
    if (r.has_fid) {
      CHECK(std::isfinite(r.fid));
      CHECK(r.fid >= 0.0);
      fid_kimgs.push_back(r.kimg);
    }
  REQUIRE(fid_kimgs.size() == 3);
  CHECK(fid_kimgs[1] == 0.12);
  CHECK(fid_kimgs[2] == 0.24);
  REQUIRE(log.checkpoints.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(log.checkpoints[i].kimg == fid_kimgs[i]);
    CHECK(fs::exists(log.checkpoints[i].path));
  }
  CHECK(!log.best_checkpoint.empty());
  for (const auto& r : log.rows)
    if (r.has_fid) CHECK(log.best_fid <= r.fid);

  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "runlog.csv"));
  CHECK(fs::exists(dir / "timing.csv"));
  CHECK(fs::exists(dir / "best.json"));
  CHECK(fs::exists(dir / "samples" / "0" / "0000.png"));
  CHECK(periogan::read_text_file((dir / "config.json").string()) == cfg.to_json());
  CHECK(periogan::read_text_file((dir / "runlog.csv").string()) == pt::runlog_csv(log));

  SUBCASE("re-run reproduces runlog.csv byte for byte") {
    const auto dir2 = temp_dir("wgangp_run_again");
    auto log2 = pt::train(cfg, manifest, dir2.string());
    CHECK(periogan::read_text_file((dir / "runlog.csv").string()) ==
          periogan::read_text_file((dir2 / "runlog.csv").string()));
  }

  SUBCASE("generate from the final checkpoint") {
    const std::string ckpt = log.checkpoints.back().path;
    auto a = pt::generate(ckpt, 5, 7);
    auto b = pt::generate(ckpt, 5, 7);
    REQUIRE(a.images.size() == 5);
    for (size_t i = 0; i < 5; ++i) CHECK(a.images[i].v == b.images[i].v);

    // any prefix regenerates without the rest
    auto prefix = pt::generate(ckpt, 3, 7);
    for (size_t i = 0; i < 3; ++i) CHECK(prefix.images[i].v == a.images[i].v);

    auto other = pt::generate(ckpt, 5, 8);
    double diff = 0.0;
    for (size_t i = 0; i < 5; ++i)
      for (size_t j = 0; j < a.images[i].v.size(); ++j)
        diff += std::abs(a.images[i].v[j] - other.images[i].v[j]);
    CHECK(diff > 0.0);

    CHECK(a.provenance[2].index == 2);
    CHECK(a.provenance[2].seed == 7);
    CHECK(a.provenance[2].checkpoint_path == ckpt);
    CHECK(a.provenance[2].config_hash == cfg.hash());
    CHECK(!a.provenance[2].label.has_value());

    expect_kind([&] { pt::generate(ckpt, 0, 7); }, ErrorKind::InvalidConfig);
    expect_kind([&] { pt::generate(ckpt, 1, 7, 1); }, ErrorKind::ConditioningError);
    expect_kind([&] { pt::generate("/nonexistent/ckpt.bin", 1, 7); },
                ErrorKind::IOFailure);

    // flip one payload byte: checksum must catch it
    const auto broken = temp_dir("broken") / "ckpt.bin";
    {
      std::string bytes = periogan::read_text_file(ckpt);
      bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
      std::ofstream out(broken, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    expect_kind([&] { pt::generate(broken.string(), 1, 7); }, ErrorKind::ChecksumError);
  }
}

TEST_CASE("wgan weight bound holds after every critic step") {
  auto manifest = toy_corpus("wgan_corpus", 36, 16, 16);
  auto cfg = toy_config(pg_kind::wgan);
  cfg.budget = 0.12;  // 10 critic steps
  cfg.eval_every_kimg = 0.12;
  const auto dir = temp_dir("wgan_run");

  int critic_events = 0;
  int violations = 0;
  auto scan = [&](const pt::StepEvent& ev, const periogan::ganzoo::GanModel& model) {
    if (ev.generator_step) return;
    ++critic_events;
    float max_abs = 0.f;
    for (const auto& p : model.critic->params().vars)
      for (float w : p.val().v) max_abs = std::max(max_abs, std::abs(w));
    if (max_abs > 0.01f) ++violations;
  };
  auto log = pt::train(cfg, manifest, dir.string(), scan);
  CHECK(critic_events == 10);
  CHECK(violations == 0);
  CHECK(log.rows.size() == 3);
}

TEST_CASE("cgan and stylegan smoke") {
  SUBCASE("cgan trains 1:1 and respects labels") {
    auto manifest = toy_corpus("cgan_corpus", 24, 16, 16);
    auto cfg = toy_config(pg_kind::cgan);
    cfg.batch_size = 8;
    cfg.budget = 0.048;  // 6 steps at 1:1
    cfg.eval_every_kimg = 0.048;
    const auto dir = temp_dir("cgan_run");
    auto log = pt::train(cfg, manifest, dir.string());
    REQUIRE(log.rows.size() == 7);
    CHECK(log.final_kimg == 6 * 8 / 1000.0);
    for (const auto& r : log.rows) {
      CHECK(std::isfinite(r.loss_d));
      CHECK(std::isfinite(r.loss_g));
    }

    const std::string ckpt = log.checkpoints.back().path;
    auto f = pt::generate(ckpt, 4, 3, 0);
    auto m = pt::generate(ckpt, 4, 3, 1);
    REQUIRE(f.images.size() == 4);
    CHECK(f.provenance[0].label == 0);
    CHECK(m.provenance[0].label == 1);
    double diff = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < 4; ++i)
      for (size_t j = 0; j < f.images[i].v.size(); ++j, ++count)
        diff += std::abs(f.images[i].v[j] - m.images[i].v[j]);
    CHECK(diff / count > 0.0);

    expect_kind([&] { pt::generate(ckpt, 1, 3, 2); }, ErrorKind::ConditioningError);

    // unlabeled records cannot drive a conditional run
    auto unlabeled = manifest;
    for (auto& rec : unlabeled.records) rec.gender = pc::Gender::unknown;
    expect_kind([&] { pt::train(cfg, unlabeled, temp_dir("cgan_unlabeled").string()); },
                ErrorKind::ConditioningError);
  }

  SUBCASE("stylegan2-lite runs at a power-of-two resolution") {
    auto manifest = toy_corpus("style_corpus", 16, 8, 8);
    auto cfg = toy_config(pg_kind::stylegan2_lite);
    cfg.image_w = 8;
    cfg.image_h = 8;
    cfg.batch_size = 4;
    cfg.budget = 0.012;  // 3 steps
    cfg.eval_every_kimg = 0.012;
    cfg.fid_samples = 8;
    cfg.learning_rate = 2.5e-3;
    const auto dir = temp_dir("style_run");
    auto log = pt::train(cfg, manifest, dir.string());
    REQUIRE(log.rows.size() == 4);
    for (const auto& r : log.rows) {
      CHECK(std::isfinite(r.loss_d));
      CHECK(std::isfinite(r.loss_g));
    }
  }
}

TEST_CASE("epoch budgets convert to kimg") {
  auto manifest = toy_corpus("epoch_corpus", 60, 16, 16);
  auto cfg = toy_config(pg_kind::wgan_gp);
  cfg.budget = 2.0;  // 2 epochs x 60 images = 120 images = 0.12 kimg
  cfg.budget_unit = pt::BudgetUnit::epochs;
  cfg.eval_every_kimg = 0.12;
  const auto dir = temp_dir("epoch_run");
  auto log = pt::train(cfg, manifest, dir.string());
  CHECK(log.final_kimg == 10 * 12 / 1000.0);
}

TEST_CASE("divergence aborts and flushes the log") {
  auto manifest = toy_corpus("diverge_corpus", 36, 16, 16);
  auto cfg = toy_config(pg_kind::wgan_gp);
  cfg.learning_rate = 1e12;
  const auto dir = temp_dir("diverge_run");

  std::string message;
  try {
    pt::train(cfg, manifest, dir.string());
    FAIL_CHECK("expected DivergedRun");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DivergedRun);
    message = e.what();
  }
  CHECK(message.find("last finite row") != std::string::npos);
  CHECK(message.find("kimg=") != std::string::npos);

  // the partial log is written out before the abort
  const std::string flushed = periogan::read_text_file((dir / "runlog.csv").string());
  CHECK(flushed.rfind("kimg,loss_d,loss_g,fid\n", 0) == 0);
  CHECK(std::count(flushed.begin(), flushed.end(), '\n') >= 2);  // header + probe row
}

TEST_CASE("hyperparameter sweep") {
  auto manifest = toy_corpus("sweep_corpus", 36, 16, 16);
  auto base = toy_config(pg_kind::wgan_gp);
  base.budget = 0.12;
  base.eval_every_kimg = 0.12;

  SUBCASE("fault isolation") {
    const auto dir = temp_dir("sweep_run");
    auto entries = pt::hyperparameter_sweep(base, "learning_rate", {1e-4, 1e12},
                                            manifest, dir.string());
    REQUIRE(entries.size() == 2);
    CHECK(!entries[0].diverged);
    CHECK(entries[0].error.empty());
    CHECK(entries[0].log.rows.size() == 3);
    CHECK(entries[1].diverged);
    CHECK(!entries[1].error.empty());

    const std::string merged =
        periogan::read_text_file((dir / "fid_vs_kimg.csv").string());
    CHECK(merged.rfind("value,kimg,fid\n", 0) == 0);
    CHECK(merged.find("1e-04,0,") != std::string::npos);
    CHECK(merged.find("1e-04,0.12,") != std::string::npos);
  }

  SUBCASE("singleton sweep equals a plain run") {
    const auto dir = temp_dir("sweep_single");
    auto entries =
        pt::hyperparameter_sweep(base, "learning_rate", {1e-4}, manifest, dir.string());
    REQUIRE(entries.size() == 1);
    auto cfg = base;
    cfg.learning_rate = 1e-4;
    const auto ref_dir = temp_dir("sweep_ref");
    auto ref = pt::train(cfg, manifest, ref_dir.string());
    CHECK(pt::runlog_csv(entries[0].log) == pt::runlog_csv(ref));
  }

  SUBCASE("input validation") {
    expect_kind(
        [&] {
          pt::hyperparameter_sweep(base, "learning_rate", {}, manifest,
                                   temp_dir("sweep_bad").string());
        },
        ErrorKind::InvalidConfig);
    expect_kind(
        [&] {
          pt::hyperparameter_sweep(base, "warp_factor", {1.0}, manifest,
                                   temp_dir("sweep_axis").string());
        },
        ErrorKind::InvalidConfig);
  }
}
