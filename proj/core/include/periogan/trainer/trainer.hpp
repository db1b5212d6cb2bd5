#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "periogan/corpus/batches.hpp"
#include "periogan/corpus/manifest.hpp"
#include "periogan/ganzoo/checkpoint.hpp"
#include "periogan/ganzoo/models.hpp"

namespace periogan::trainer {

enum class Optimizer { adam, rmsprop };
enum class BudgetUnit { kimg, epochs };

std::string to_string(Optimizer v);
std::string to_string(BudgetUnit v);
Optimizer optimizer_from_string(const std::string& s);
BudgetUnit budget_unit_from_string(const std::string& s);

/// Everything a run needs; serialized verbatim into the run directory so a
/// run is replayable from its config.json alone.
struct TrainConfig {
  ganzoo::ModelKind model_kind = ganzoo::ModelKind::wgan_gp;
  int image_w = 80;
  int image_h = 160;
  double learning_rate = 1e-4;
  Optimizer optimizer = Optimizer::adam;
  int batch_size = 60;
  double budget = 0.0;  // interpreted per budget_unit
  BudgetUnit budget_unit = BudgetUnit::kimg;
  double eval_every_kimg = 200.0;
  uint64_t seed = 0;
  double lambda_gp = 10.0;   // wgan_gp only
  double clip_c = 0.01;      // wgan only
  int n_critic = 5;          // wasserstein variants; others train 1:1
  int d_z = 128;             // forced to 512 for stylegan2_lite
  int base_ch = 64;
  int fid_samples = 1000;    // per-eval sample count (both sides capped)
  std::string embedder_id = "tiny2048";
  int sample_grid = 16;      // images written per eval under samples/

  void validate() const;
  ganzoo::ModelConfig model_config() const;

  /// Canonical JSON with sorted keys; hash() digests this string.
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);  // unknown keys rejected
  std::string hash() const;
};

struct LogRow {
  double kimg = 0.0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double fid = std::numeric_limits<double>::quiet_NaN();
  bool has_fid = false;
};

struct EvalTiming {
  double kimg = 0.0;
  double wall_s = 0.0;
};

struct CheckpointRef {
  double kimg = 0.0;
  std::string path;
};

struct RunLog {
  std::vector<LogRow> rows;
  std::vector<EvalTiming> timings;
  std::vector<CheckpointRef> checkpoints;
  std::string config_json;
  std::string config_hash;
  double best_fid = std::numeric_limits<double>::infinity();
  double best_fid_kimg = 0.0;
  std::string best_checkpoint;
  double final_kimg = 0.0;
  bool diverged = false;
};

/// Serializations shared by the trainer and the report tooling. runlog.csv
/// carries (kimg,loss_d,loss_g,fid) with fid blank on non-eval rows; wall
/// clock lives in timing.csv so re-runs stay byte-identical.
std::string runlog_csv(const RunLog& log);
std::string timing_csv(const RunLog& log);

/// Fires after every optimizer update; critic_step counts critic updates from
/// 1, generator_step marks rows emitted after a generator update. Used by
/// tests to scan invariants (e.g. the WGAN weight bound) mid-run.
struct StepEvent {
  int critic_step = 0;
  bool generator_step = false;
  double kimg = 0.0;
  double loss_d = 0.0;
  double loss_g = 0.0;
};
using StepCallback = std::function<void(const StepEvent&, const ganzoo::GanModel&)>;

/// Runs the full optimization loop, writing config.json, runlog.csv,
/// timing.csv, checkpoints/ and samples/ under run_dir. Divergence (non-finite
/// loss, or |loss| > 1e6 for 100 consecutive steps) flushes the log collected
/// so far and raises DivergedRun carrying the last finite row.
RunLog train(const TrainConfig& config, const corpus::Manifest& manifest,
             const std::string& run_dir, const StepCallback& on_step = {});

struct Provenance {
  std::string checkpoint_path;
  std::string config_hash;
  uint64_t seed = 0;
  int index = 0;
  std::optional<int> label;
  uint64_t noise_seed = 0;
};

struct GeneratedSet {
  std::vector<corpus::PixelTensor> images;
  std::vector<Provenance> provenance;
};

/// Synthesizes n images from a checkpoint. Image i depends only on
/// (seed, i), so any subset is regenerable without the rest. Conditional
/// models take an explicit label or alternate female/male by index.
GeneratedSet generate(const std::string& checkpoint_path, int n, uint64_t seed,
                      std::optional<int> label = {});

struct SweepEntry {
  double value = 0.0;
  TrainConfig config;
  RunLog log;
  bool diverged = false;
  std::string error;
};

/// One independent run per value on a shared data seed; a diverging run is
/// recorded and does not abort its siblings. Writes fid_vs_kimg.csv
/// (value,kimg,fid) merged across runs under sweep_dir.
std::vector<SweepEntry> hyperparameter_sweep(const TrainConfig& base,
                                             const std::string& axis,
                                             const std::vector<double>& values,
                                             const corpus::Manifest& manifest,
                                             const std::string& sweep_dir,
                                             const StepCallback& on_step = {});

}  // namespace periogan::trainer
