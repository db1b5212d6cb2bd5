#include "periogan/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "periogan/ganzoo/losses.hpp"
#include "periogan/nn/optim.hpp"
#include "periogan/quality/embed.hpp"
#include "periogan/quality/fid.hpp"
#include "periogan/util/csvio.hpp"
#include "periogan/util/hash.hpp"

namespace fs = std::filesystem;

namespace periogan::trainer {

using ganzoo::FVar;
using ganzoo::Labels;
using ganzoo::ModelKind;

std::string to_string(Optimizer v) { return v == Optimizer::adam ? "adam" : "rmsprop"; }
std::string to_string(BudgetUnit v) { return v == BudgetUnit::kimg ? "kimg" : "epochs"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "rmsprop") return Optimizer::rmsprop;
  raise(ErrorKind::InvalidConfig, "unknown optimizer: " + s);
}

BudgetUnit budget_unit_from_string(const std::string& s) {
  if (s == "kimg") return BudgetUnit::kimg;
  if (s == "epochs") return BudgetUnit::epochs;
  raise(ErrorKind::InvalidConfig, "unknown budget unit: " + s);
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, ErrorKind::InvalidConfig, "learning_rate must be > 0");
  require(batch_size >= 1, ErrorKind::InvalidConfig, "batch_size must be >= 1");
  require(budget > 0.0, ErrorKind::InvalidConfig, "budget must be > 0");
  require(eval_every_kimg > 0.0, ErrorKind::InvalidConfig, "eval_every_kimg must be > 0");
  require(n_critic >= 1, ErrorKind::InvalidConfig, "n_critic must be >= 1");
  require(fid_samples >= 2, ErrorKind::InvalidConfig, "fid_samples must be >= 2");
  require(sample_grid >= 0, ErrorKind::InvalidConfig, "sample_grid must be >= 0");
  if (model_kind == ModelKind::wgan) {
    require(optimizer == Optimizer::rmsprop, ErrorKind::InvalidConfig,
            "wgan trains with rmsprop");
    require(clip_c > 0.0, ErrorKind::InvalidConfig, "clip_c must be > 0");
  } else {
    require(optimizer == Optimizer::adam, ErrorKind::InvalidConfig,
            to_string(model_kind) + " trains with adam");
  }
  if (model_kind == ModelKind::wgan_gp)
    require(lambda_gp > 0.0, ErrorKind::InvalidConfig, "lambda_gp must be > 0");
  model_config().validate();
}

ganzoo::ModelConfig TrainConfig::model_config() const {
  ganzoo::ModelConfig mc;
  mc.kind = model_kind;
  mc.image_w = image_w;
  mc.image_h = image_h;
  mc.d_z = model_kind == ModelKind::stylegan2_lite ? 512 : d_z;
  mc.base_ch = base_ch;
  mc.clip_c = static_cast<float>(clip_c);
  return mc;
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["model_kind"] = ganzoo::to_string(model_kind);
  j["image_w"] = image_w;
  j["image_h"] = image_h;
  j["learning_rate"] = learning_rate;
  j["optimizer"] = trainer::to_string(optimizer);
  j["batch_size"] = batch_size;
  j["budget"] = budget;
  j["budget_unit"] = trainer::to_string(budget_unit);
  j["eval_every_kimg"] = eval_every_kimg;
  j["seed"] = seed;
  j["lambda_gp"] = lambda_gp;
  j["clip_c"] = clip_c;
  j["n_critic"] = n_critic;
  j["d_z"] = d_z;
  j["base_ch"] = base_ch;
  j["fid_samples"] = fid_samples;
  j["embedder_id"] = embedder_id;
  j["sample_grid"] = sample_grid;
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::InvalidConfig, "config root must be a JSON object");
  static const char* known[] = {
      "model_kind", "image_w",   "image_h",  "learning_rate", "optimizer",
      "batch_size", "budget",    "budget_unit", "eval_every_kimg", "seed",
      "lambda_gp",  "clip_c",    "n_critic", "d_z",           "base_ch",
      "fid_samples", "embedder_id", "sample_grid"};
  for (const auto& [key, value] : j.items()) {
    const bool ok = std::any_of(std::begin(known), std::end(known),
                                [&](const char* k) { return key == k; });
    require(ok, ErrorKind::InvalidConfig, "unknown config key: " + key);
  }
  TrainConfig c;
  try {
    if (j.contains("model_kind"))
      c.model_kind = ganzoo::model_kind_from_string(j["model_kind"].get<std::string>());
    if (j.contains("image_w")) c.image_w = j["image_w"].get<int>();
    if (j.contains("image_h")) c.image_h = j["image_h"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("optimizer"))
      c.optimizer = optimizer_from_string(j["optimizer"].get<std::string>());
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("budget")) c.budget = j["budget"].get<double>();
    if (j.contains("budget_unit"))
      c.budget_unit = budget_unit_from_string(j["budget_unit"].get<std::string>());
    if (j.contains("eval_every_kimg")) c.eval_every_kimg = j["eval_every_kimg"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("lambda_gp")) c.lambda_gp = j["lambda_gp"].get<double>();
    if (j.contains("clip_c")) c.clip_c = j["clip_c"].get<double>();
    if (j.contains("n_critic")) c.n_critic = j["n_critic"].get<int>();
    if (j.contains("d_z")) c.d_z = j["d_z"].get<int>();
    if (j.contains("base_ch")) c.base_ch = j["base_ch"].get<int>();
    if (j.contains("fid_samples")) c.fid_samples = j["fid_samples"].get<int>();
    if (j.contains("embedder_id")) c.embedder_id = j["embedder_id"].get<std::string>();
    if (j.contains("sample_grid")) c.sample_grid = j["sample_grid"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("config field has wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const { return digest_string(to_json()); }

std::string runlog_csv(const RunLog& log) {
  std::string out = "kimg,loss_d,loss_g,fid\n";
  for (const auto& r : log.rows) {
    out += format_number(r.kimg) + "," + format_number(r.loss_d) + "," +
           format_number(r.loss_g) + ",";
    if (r.has_fid) out += format_number(r.fid);
    out += "\n";
  }
  return out;
}

std::string timing_csv(const RunLog& log) {
  std::string out = "kimg,wall_s\n";
  for (const auto& t : log.timings)
    out += format_number(t.kimg) + "," + format_number(t.wall_s) + "\n";
  return out;
}

namespace {

struct OptimizerPair {
  Optimizer which = Optimizer::adam;
  nn::Adam adam_g, adam_d;
  nn::RMSprop rms_g, rms_d;

  void step_gen(nn::ParamSet<float>& p) {
    which == Optimizer::adam ? adam_g.step(p) : rms_g.step(p);
  }
  void step_critic(nn::ParamSet<float>& p) {
    which == Optimizer::adam ? adam_d.step(p) : rms_d.step(p);
  }
};

OptimizerPair make_optimizers(const TrainConfig& cfg) {
  OptimizerPair o;
  o.which = cfg.optimizer;
  const float lr = static_cast<float>(cfg.learning_rate);
  float b1 = 0.5f, b2 = 0.999f;  // cgan
  if (cfg.model_kind == ModelKind::wgan_gp) b2 = 0.9f;
  if (cfg.model_kind == ModelKind::stylegan2_lite) {
    b1 = 0.0f;
    b2 = 0.99f;
  }
  o.adam_g = nn::Adam(lr, b1, b2);
  o.adam_d = nn::Adam(lr, b1, b2);
  o.rms_g = nn::RMSprop(lr);
  o.rms_d = nn::RMSprop(lr);
  return o;
}

/// Serves full-size batches only; a trailing partial batch would break the
/// exact kimg = steps * batch_size / 1000 accounting, so it is skipped.
class BatchFeed {
 public:
  BatchFeed(const corpus::Manifest& m, const TrainConfig& cfg)
      : loader_(m, cfg.image_w, cfg.image_h, cfg.batch_size,
                mix_seed(cfg.seed, fnv1a64("trainer.shuffle"))),
        batch_size_(cfg.batch_size) {}

  corpus::Batch next() {
    for (;;) {
      if (index_ >= loader_.batch_count()) {
        ++epoch_;
        loader_.start_epoch(epoch_);
        index_ = 0;
      }
      corpus::Batch b = loader_.load(index_++);
      if (static_cast<int>(b.indices.size()) == batch_size_) return b;
    }
  }

 private:
  corpus::BatchLoader loader_;
  int batch_size_ = 0;
  int index_ = 0;
  int epoch_ = 0;
};

Labels labels_for(const corpus::Manifest& m, const std::vector<int>& indices) {
  Labels out;
  out.reserve(indices.size());
  for (int idx : indices) {
    const auto& rec = m.records[static_cast<size_t>(idx)];
    require(rec.gender != corpus::Gender::unknown, ErrorKind::ConditioningError,
            "conditional training needs gender labels; record " + rec.id + " has none");
    out.push_back(rec.gender == corpus::Gender::male ? 1 : 0);
  }
  return out;
}

std::string format_kimg(double kimg) { return format_number(kimg); }

double scalar(const FVar& v) { return static_cast<double>(v.val().v[0]); }

struct TrainOutcome {
  RunLog log;
  bool diverged = false;
  std::string message;
};

std::string row_text(const LogRow& r) {
  return "kimg=" + format_number(r.kimg) + " loss_d=" + format_number(r.loss_d) +
         " loss_g=" + format_number(r.loss_g);
}

TrainOutcome train_impl(const TrainConfig& cfg, const corpus::Manifest& manifest,
                        const std::string& run_dir, const StepCallback& on_step) {
  cfg.validate();
  require(!manifest.records.empty(), ErrorKind::EmptyCorpus,
          "training needs a non-empty manifest");
  const int n_records = static_cast<int>(manifest.records.size());
  require(cfg.batch_size <= n_records, ErrorKind::InvalidConfig,
          "batch_size exceeds the corpus size");
  require(n_records >= 2, ErrorKind::InsufficientSamples,
          "FID evaluation needs at least 2 real images");

  fs::create_directories(fs::path(run_dir) / "checkpoints");
  fs::create_directories(fs::path(run_dir) / "samples");

  TrainOutcome out;
  RunLog& log = out.log;
  log.config_json = cfg.to_json();
  log.config_hash = cfg.hash();
  write_text_file((fs::path(run_dir) / "config.json").string(), log.config_json);

  const double budget_kimg = cfg.budget_unit == BudgetUnit::kimg
                                 ? cfg.budget
                                 : cfg.budget * n_records / 1000.0;
  const bool wasserstein =
      cfg.model_kind == ModelKind::wgan || cfg.model_kind == ModelKind::wgan_gp;
  const int block = wasserstein ? cfg.n_critic : 1;
  const int64_t steps_needed = static_cast<int64_t>(
      std::ceil(budget_kimg * 1000.0 / cfg.batch_size));
  const int64_t blocks = std::max<int64_t>(1, (steps_needed + block - 1) / block);

  auto model = ganzoo::GanModel::build(cfg.model_config(),
                                       mix_seed(cfg.seed, fnv1a64("trainer.init")));
  const int d_z = model.cfg.d_z;
  auto opt = make_optimizers(cfg);
  const float lambda = static_cast<float>(cfg.lambda_gp);
  const float clip_c = static_cast<float>(cfg.clip_c);

  BatchFeed feed(manifest, cfg);
  Rng latent_rng(mix_seed(cfg.seed, fnv1a64("trainer.latent")));
  Rng noise_rng(mix_seed(cfg.seed, fnv1a64("trainer.noise")));
  Rng gp_rng(mix_seed(cfg.seed, fnv1a64("trainer.gp")));

  // Real-side FID statistics are fixed for the whole run; embed once.
  const auto embedder = quality::Embedder::make(cfg.embedder_id);
  const int fid_real_n = std::min(cfg.fid_samples, n_records);
  quality::GaussianSummary real_summary;
  {
    std::vector<corpus::PixelTensor> real;
    real.reserve(static_cast<size_t>(fid_real_n));
    for (int i = 0; i < fid_real_n; ++i)
      real.push_back(corpus::to_pixel(
          corpus::load_record(manifest.records[static_cast<size_t>(i)], cfg.image_w,
                              cfg.image_h)));
    real_summary = quality::gaussian_summary(embedder.embed(real));
  }

  const bool conditional = model.cfg.conditional();
  auto gen_labels = [&](int n) {
    Labels y(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<size_t>(i)] = i % 2;
    return y;
  };

  int eval_index = 0;
  auto evaluate = [&](double kimg) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng erng(mix_seed(mix_seed(cfg.seed, fnv1a64("trainer.eval")),
                      static_cast<uint64_t>(eval_index)));
    ++eval_index;

    std::vector<corpus::PixelTensor> fake;
    fake.reserve(static_cast<size_t>(cfg.fid_samples));
    {
      nn::NoGradGuard off(false);
      int done = 0;
      while (done < cfg.fid_samples) {
        const int n = std::min(64, cfg.fid_samples - done);
        FVar z = nn::constant(ganzoo::sample_latent(erng, n, d_z));
        Labels y;
        if (conditional) y = gen_labels(n);
        FVar imgs = model.gen_forward(z, conditional ? &y : nullptr, erng.next_u64());
        for (int i = 0; i < n; ++i) fake.push_back(corpus::to_pixel(imgs.val(), i));
        done += n;
      }
    }
    auto fake_summary = quality::gaussian_summary(embedder.embed(fake));
    const double fid = quality::frechet_distance(real_summary, fake_summary);

    const std::string tag = format_kimg(kimg);
    const fs::path sample_dir = fs::path(run_dir) / "samples" / tag;
    fs::create_directories(sample_dir);
    char name[32];
    for (int i = 0; i < std::min<int>(cfg.sample_grid, static_cast<int>(fake.size())); ++i) {
      std::snprintf(name, sizeof(name), "%04d.png", i);
      corpus::save_image((sample_dir / name).string(), fake[static_cast<size_t>(i)]);
    }

    const std::string ckpt =
        (fs::path(run_dir) / "checkpoints" / ("ckpt_" + tag + ".bin")).string();
    ganzoo::CheckpointMeta meta;
    meta.kimg = kimg;
    meta.rng_state = latent_rng.state_string();
    meta.config_hash = log.config_hash;
    ganzoo::save_checkpoint(ckpt, model, meta);
    log.checkpoints.push_back({kimg, ckpt});

    if (fid < log.best_fid) {
      log.best_fid = fid;
      log.best_fid_kimg = kimg;
      log.best_checkpoint = ckpt;
    }
    const auto t1 = std::chrono::steady_clock::now();
    log.timings.push_back({kimg, std::chrono::duration<double>(t1 - t0).count()});
    return fid;
  };

  auto critic_scores = [&](const FVar& x, const Labels* y) {
    return model.critic_forward(x, y);
  };
  auto gp_critic = [&](const FVar& x) { return model.critic_forward(x, nullptr); };

  auto flush = [&] {
    write_text_file((fs::path(run_dir) / "runlog.csv").string(), runlog_csv(log));
    write_text_file((fs::path(run_dir) / "timing.csv").string(), timing_csv(log));
    if (!log.best_checkpoint.empty()) {
      nlohmann::json best;
      best["kimg"] = log.best_fid_kimg;
      best["fid"] = log.best_fid;
      best["checkpoint"] = log.best_checkpoint;
      best["config_hash"] = log.config_hash;
      write_text_file((fs::path(run_dir) / "best.json").string(), best.dump(2) + "\n");
    }
  };

  int consecutive_big = 0;
  LogRow last_finite;
  bool have_finite = false;
  // Returns true when the run must abort; fills out.message.
  auto diverged_on = [&](double v, const char* which) {
    if (!std::isfinite(v)) {
      out.message = std::string("non-finite ") + which +
                    (have_finite ? "; last finite row: " + row_text(last_finite)
                                 : "; no finite row was logged");
      return true;
    }
    consecutive_big = std::abs(v) > 1e6 ? consecutive_big + 1 : 0;
    if (consecutive_big >= 100) {
      out.message = std::string("|") + which + "| > 1e6 for 100 consecutive steps" +
                    (have_finite ? "; last finite row: " + row_text(last_finite)
                                 : "");
      return true;
    }
    return false;
  };

  // Probe losses before the first update so the kimg=0 eval row is populated.
  {
    corpus::Batch pb = feed.next();
    Rng probe_rng(mix_seed(cfg.seed, fnv1a64("trainer.probe")));
    Labels yl;
    const Labels* lab = nullptr;
    if (conditional) {
      yl = labels_for(manifest, pb.indices);
      lab = &yl;
    }
    FVar z = nn::constant(ganzoo::sample_latent(probe_rng, cfg.batch_size, d_z));
    FVar fake = model.gen_forward(z, lab, probe_rng.next_u64());
    FVar d_real = critic_scores(nn::constant(pb.images), lab);
    FVar d_fake = critic_scores(fake, lab);
    LogRow row;
    if (wasserstein) {
      FVar ld = ganzoo::wasserstein_critic_loss(d_real, d_fake);
      if (cfg.model_kind == ModelKind::wgan_gp)
        ld = nn::add(ld, ganzoo::gradient_penalty<float>(gp_critic, pb.images,
                                                         fake.val(), probe_rng, lambda));
      row.loss_d = scalar(ld);
      row.loss_g = scalar(ganzoo::wasserstein_generator_loss(d_fake));
    } else {
      auto al = ganzoo::adversarial_losses_logits(d_real, d_fake, true);
      row.loss_d = scalar(al.loss_d);
      row.loss_g = scalar(al.loss_g);
    }
    if (diverged_on(row.loss_d, "loss_d") || diverged_on(row.loss_g, "loss_g")) {
      out.diverged = true;
      log.diverged = true;
      flush();
      return out;
    }
    row.kimg = 0.0;
    row.fid = evaluate(0.0);
    row.has_fid = true;
    log.rows.push_back(row);
    last_finite = row;
    have_finite = true;
  }

  double next_eval = cfg.eval_every_kimg;
  int critic_step = 0;
  double last_loss_g = log.rows.front().loss_g;

  for (int64_t b = 0; b < blocks; ++b) {
    double block_loss_d = 0.0;
    bool abort = false;
    for (int k = 0; k < block && !abort; ++k) {
      corpus::Batch rb = feed.next();
      Labels yl;
      const Labels* lab = nullptr;
      if (conditional) {
        yl = labels_for(manifest, rb.indices);
        lab = &yl;
      }
      FVar fake;
      {
        nn::NoGradGuard off(false);
        FVar z = nn::constant(ganzoo::sample_latent(latent_rng, cfg.batch_size, d_z));
        fake = model.gen_forward(z, lab, noise_rng.next_u64());
      }
      FVar d_real = critic_scores(nn::constant(rb.images), lab);
      FVar d_fake = critic_scores(fake, lab);
      FVar loss_d;
      if (wasserstein) {
        loss_d = ganzoo::wasserstein_critic_loss(d_real, d_fake);
        if (cfg.model_kind == ModelKind::wgan_gp)
          loss_d = nn::add(loss_d, ganzoo::gradient_penalty<float>(
                                       gp_critic, rb.images, fake.val(), gp_rng, lambda));
      } else {
        loss_d = ganzoo::adversarial_losses_logits(d_real, d_fake, true).loss_d;
      }
      model.critic_params().zero_grad();
      nn::backward(loss_d);
      opt.step_critic(model.critic_params());
      if (cfg.model_kind == ModelKind::wgan)
        ganzoo::clip_weights(model.critic_params(), clip_c);

      ++critic_step;
      const double v = scalar(loss_d);
      block_loss_d += v;
      if (on_step)
        on_step({critic_step, false, critic_step * cfg.batch_size / 1000.0, v,
                 last_loss_g},
                model);
      abort = diverged_on(v, "loss_d");
    }
    if (abort) break;

    // Generator update on a fresh latent batch; conditional labels alternate
    // classes so both condition planes keep receiving gradient.
    Labels yg;
    const Labels* labg = nullptr;
    if (conditional) {
      yg = gen_labels(cfg.batch_size);
      labg = &yg;
    }
    FVar z = nn::constant(ganzoo::sample_latent(latent_rng, cfg.batch_size, d_z));
    FVar fake = model.gen_forward(z, labg, noise_rng.next_u64());
    FVar d_fake = critic_scores(fake, labg);
    FVar loss_g = wasserstein
                      ? ganzoo::wasserstein_generator_loss(d_fake)
                      : ganzoo::adversarial_losses_logits(d_fake, d_fake, true).loss_g;
    model.gen_params().zero_grad();
    nn::backward(loss_g);
    opt.step_gen(model.gen_params());

    LogRow row;
    row.kimg = critic_step * static_cast<double>(cfg.batch_size) / 1000.0;
    row.loss_d = block_loss_d / block;
    row.loss_g = scalar(loss_g);
    last_loss_g = row.loss_g;
    if (on_step) on_step({critic_step, true, row.kimg, row.loss_d, row.loss_g}, model);
    if (diverged_on(row.loss_g, "loss_g")) break;

    const bool last_block = b + 1 == blocks;
    if (row.kimg + 1e-9 >= next_eval || last_block) {
      row.fid = evaluate(row.kimg);
      row.has_fid = true;
      while (next_eval <= row.kimg + 1e-9) next_eval += cfg.eval_every_kimg;
    }
    log.rows.push_back(row);
    last_finite = row;
    have_finite = true;
  }

  if (!out.message.empty()) {
    out.diverged = true;
    log.diverged = true;
  }
  log.final_kimg = critic_step * static_cast<double>(cfg.batch_size) / 1000.0;
  flush();
  return out;
}

}  // namespace

RunLog train(const TrainConfig& config, const corpus::Manifest& manifest,
             const std::string& run_dir, const StepCallback& on_step) {
  TrainOutcome out = train_impl(config, manifest, run_dir, on_step);
  if (out.diverged) raise(ErrorKind::DivergedRun, out.message);
  return out.log;
}

GeneratedSet generate(const std::string& checkpoint_path, int n, uint64_t seed,
                      std::optional<int> label) {
  require(n >= 1, ErrorKind::InvalidConfig, "generate needs n >= 1");
  auto loaded = ganzoo::load_checkpoint(checkpoint_path);
  auto& model = loaded.model;
  const bool conditional = model.cfg.conditional();
  if (label) {
    require(conditional, ErrorKind::ConditioningError,
            "label given but the model is unconditional");
    require(*label == 0 || *label == 1, ErrorKind::ConditioningError,
            "label must be 0 or 1");
  }

  const uint64_t z_base = mix_seed(seed, fnv1a64("gen.z"));
  const uint64_t noise_base = mix_seed(seed, fnv1a64("gen.noise"));

  GeneratedSet out;
  out.images.reserve(static_cast<size_t>(n));
  out.provenance.reserve(static_cast<size_t>(n));
  nn::NoGradGuard off(false);
  // One forward per image: the result is a pure function of (seed, index), so
  // any subset regenerates bit-identically without the rest. Batched forwards
  // would tie the arithmetic to the batch extent through GEMM blocking.
  for (int i = 0; i < n; ++i) {
    Rng zr(mix_seed(z_base, static_cast<uint64_t>(i)));
    nn::Tensor z({1, model.cfg.d_z});
    for (int dd = 0; dd < model.cfg.d_z; ++dd)
      z.v[static_cast<size_t>(dd)] = static_cast<float>(zr.normal());
    Labels y{label ? *label : i % 2};
    const uint64_t noise_seed = mix_seed(noise_base, static_cast<uint64_t>(i));
    FVar img = model.gen_forward(nn::constant(z), conditional ? &y : nullptr, noise_seed);
    out.images.push_back(corpus::to_pixel(img.val()));
    Provenance p;
    p.checkpoint_path = checkpoint_path;
    p.config_hash = loaded.meta.config_hash;
    p.seed = seed;
    p.index = i;
    if (conditional) p.label = y[0];
    p.noise_seed = noise_seed;
    out.provenance.push_back(p);
  }
  return out;
}

std::vector<SweepEntry> hyperparameter_sweep(const TrainConfig& base,
                                             const std::string& axis,
                                             const std::vector<double>& values,
                                             const corpus::Manifest& manifest,
                                             const std::string& sweep_dir,
                                             const StepCallback& on_step) {
  require(!values.empty(), ErrorKind::InvalidConfig, "sweep needs at least one value");
  require(axis == "learning_rate" || axis == "batch_size" || axis == "lambda_gp" ||
              axis == "n_critic",
          ErrorKind::InvalidConfig, "unknown sweep axis: " + axis);

  auto apply = [&](TrainConfig& cfg, double v) {
    auto as_int = [&](const char* what) {
      require(v == std::floor(v) && v >= 1.0, ErrorKind::InvalidConfig,
              std::string(what) + " must be a positive integer");
      return static_cast<int>(v);
    };
    if (axis == "learning_rate")
      cfg.learning_rate = v;
    else if (axis == "batch_size")
      cfg.batch_size = as_int("batch_size");
    else if (axis == "lambda_gp")
      cfg.lambda_gp = v;
    else
      cfg.n_critic = as_int("n_critic");
  };

  std::vector<SweepEntry> entries;
  for (size_t i = 0; i < values.size(); ++i) {
    SweepEntry entry;
    entry.value = values[i];
    entry.config = base;
    const std::string run_dir =
        (fs::path(sweep_dir) / ("run_" + std::to_string(i) + "_" + format_number(values[i])))
            .string();
    try {
      apply(entry.config, values[i]);
      TrainOutcome out = train_impl(entry.config, manifest, run_dir, on_step);
      entry.log = std::move(out.log);
      entry.diverged = out.diverged;
      entry.error = out.message;
    } catch (const Error& e) {
      entry.error = e.what();
    }
    entries.push_back(std::move(entry));
  }

  std::string merged = "value,kimg,fid\n";
  for (const auto& e : entries)
    for (const auto& r : e.log.rows)
      if (r.has_fid)
        merged += format_number(e.value) + "," + format_number(r.kimg) + "," +
                  format_number(r.fid) + "\n";
  fs::create_directories(sweep_dir);
  write_text_file((fs::path(sweep_dir) / "fid_vs_kimg.csv").string(), merged);
  return entries;
}

}  // namespace periogan::trainer
