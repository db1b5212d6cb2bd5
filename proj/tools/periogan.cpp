#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "periogan/corpus/manifest.hpp"
#include "periogan/corpus/pixel.hpp"
#include "periogan/padlab/experiment.hpp"
#include "periogan/quality/embed.hpp"
#include "periogan/quality/fid.hpp"
#include "periogan/quality/sharpness.hpp"
#include "periogan/quality/tsne.hpp"
#include "periogan/trainer/recipes.hpp"
#include "periogan/trainer/trainer.hpp"
#include "periogan/util/csvio.hpp"
#include "periogan/util/error.hpp"

namespace fs = std::filesystem;

using periogan::Error;
using periogan::ErrorKind;
using periogan::format_number;
using periogan::raise;
using periogan::read_text_file;
using periogan::require;
using periogan::write_text_file;
namespace corpus = periogan::corpus;
namespace ganzoo = periogan::ganzoo;
namespace quality = periogan::quality;
namespace padlab = periogan::padlab;
namespace trainer = periogan::trainer;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v && *v) ? std::string(v) : fallback;
}

void check_device() {
  const char* dev = std::getenv("PERIOGAN_DEVICE");
  if (dev && *dev && std::string(dev) != "cpu")
    raise(ErrorKind::UsageError,
          std::string("PERIOGAN_DEVICE=") + dev + " is not supported; this build runs on cpu only");
}

/// Outputs are append-only: an existing path needs --force, which replaces it.
void claim_output(const std::string& path, bool force) {
  if (path.empty()) return;
  if (fs::exists(path)) {
    require(force, ErrorKind::UsageError,
            path + " already exists; outputs are append-only, pass --force to replace it");
    fs::remove_all(path);
  }
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

struct DirImages {
  std::vector<corpus::PixelTensor> images;
  std::vector<std::string> files;  // relative to the scanned dir, sorted
};

/// Loads every decodable image under dir in sorted path order. Undecodable
/// files (a provenance.csv next to generated PNGs, say) are skipped with a
/// note on stderr.
DirImages load_dir_images(const std::string& dir, int limit) {
  require(fs::is_directory(dir), ErrorKind::IOFailure, "not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  DirImages out;
  for (const auto& p : paths) {
    if (limit > 0 && static_cast<int>(out.images.size()) >= limit) break;
    try {
      out.images.push_back(corpus::load_image(p.string()));
    } catch (const Error&) {
      std::cerr << "note: skipping undecodable file " << p.string() << "\n";
      continue;
    }
    out.files.push_back(fs::relative(p, dir).generic_string());
  }
  require(!out.images.empty(), ErrorKind::EmptyCorpus, "no decodable images under " + dir);
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == item.size() && !item.empty(), ErrorKind::UsageError,
            flag + ": \"" + item + "\" is not a number");
    values.push_back(v);
  }
  require(!values.empty(), ErrorKind::UsageError, flag + " needs at least one value");
  return values;
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    require(ok, ErrorKind::InvalidConfig, "unknown key \"" + key + "\" in " + where);
  }
}

/// One JSON document describing a whole experiment. The train command
/// consumes workspace, seed, train and quality; the corpus and pad sections
/// are validated so a stored config stays a faithful record, but ingest and
/// attack take their inputs from flags.
struct RunConfig {
  std::optional<std::string> workspace;
  std::optional<uint64_t> seed;
  bool has_train = false;
  trainer::TrainConfig train;
};

RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("run config: ") + e.what());
  }
  require(j.is_object(), ErrorKind::InvalidConfig, "run config root must be a JSON object");
  reject_unknown(j, {"schema_version", "workspace", "seed", "corpus", "train", "quality", "pad"},
                 "run config");
  RunConfig rc;
  try {
    if (j.contains("schema_version"))
      require(j.at("schema_version").get<int64_t>() == 1, ErrorKind::InvalidConfig,
              "unsupported schema_version; this build reads version 1");
    if (j.contains("workspace")) rc.workspace = j.at("workspace").get<std::string>();
    if (j.contains("seed")) rc.seed = j.at("seed").get<uint64_t>();
    if (j.contains("corpus")) {
      const auto& c = j.at("corpus");
      require(c.is_object(), ErrorKind::InvalidConfig, "corpus section must be an object");
      reject_unknown(c, {"dir", "labeling_rules", "target_w", "target_h"}, "corpus section");
      if (c.contains("dir")) c.at("dir").get<std::string>();
      if (c.contains("labeling_rules")) c.at("labeling_rules").get<std::string>();
      if (c.contains("target_w")) c.at("target_w").get<int64_t>();
      if (c.contains("target_h")) c.at("target_h").get<int64_t>();
    }
    if (j.contains("train")) {
      require(j.at("train").is_object(), ErrorKind::InvalidConfig, "train section must be an object");
      rc.train = trainer::TrainConfig::from_json(j.at("train").dump());
      rc.has_train = true;
    }
    if (j.contains("quality")) {
      const auto& q = j.at("quality");
      require(q.is_object(), ErrorKind::InvalidConfig, "quality section must be an object");
      reject_unknown(q, {"embedder_id", "fid_samples", "tsne"}, "quality section");
      // The quality section wins over the train section for the shared
      // evaluation knobs.
      if (q.contains("embedder_id")) rc.train.embedder_id = q.at("embedder_id").get<std::string>();
      if (q.contains("fid_samples")) rc.train.fid_samples = static_cast<int>(q.at("fid_samples").get<int64_t>());
      if (q.contains("tsne")) {
        const auto& t = q.at("tsne");
        require(t.is_object(), ErrorKind::InvalidConfig, "tsne section must be an object");
        reject_unknown(t,
                       {"perplexity", "iterations", "learning_rate", "early_exaggeration",
                        "exaggeration_iters", "seed"},
                       "tsne section");
        if (t.contains("perplexity")) t.at("perplexity").get<double>();
        if (t.contains("iterations")) t.at("iterations").get<int64_t>();
        if (t.contains("learning_rate")) t.at("learning_rate").get<double>();
        if (t.contains("early_exaggeration")) t.at("early_exaggeration").get<double>();
        if (t.contains("exaggeration_iters")) t.at("exaggeration_iters").get<int64_t>();
        if (t.contains("seed")) t.at("seed").get<uint64_t>();
      }
    }
    if (j.contains("pad")) {
      const auto& p = j.at("pad");
      require(p.is_object(), ErrorKind::InvalidConfig, "pad section must be an object");
      reject_unknown(p, {"classifier", "threshold"}, "pad section");
      if (p.contains("classifier")) p.at("classifier").get<std::string>();
      if (p.contains("threshold")) p.at("threshold").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::InvalidConfig, std::string("run config: ") + e.what());
  }
  if (rc.has_train) rc.train.validate();
  return rc;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
  std::string dir;
  std::string labeling;
  std::string out = "manifest.json";
  bool force = false;
};

int cmd_ingest(const IngestOpts& o) {
  check_device();
  corpus::LabelingRules rules;
  if (!o.labeling.empty()) rules = corpus::load_labeling_rules(o.labeling);
  if (fs::exists(o.out))
    require(o.force, ErrorKind::UsageError,
            o.out + " already exists; outputs are append-only, pass --force to replace it");
  auto result = corpus::ingest_directory(o.dir, rules);
  for (const auto& f : result.failures)
    std::cerr << "undecodable: " << f.path << " (" << f.reason << ")\n";
  const fs::path parent = fs::path(o.out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  corpus::save_manifest(o.out, result.manifest);
  nlohmann::json j;
  j["manifest"] = o.out;
  j["records"] = result.manifest.records.size();
  j["failures"] = result.failures.size();
  j["checksum"] = result.manifest.checksum;
  j["source_width"] = result.manifest.source_width;
  j["source_height"] = result.manifest.source_height;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string recipe;
  std::string config;
  std::string manifest;
  std::string workspace;
  std::string run_name;
  std::string sweep_lr;
  uint64_t seed = 0;
  double budget_kimg = 0.0;
  double budget_epochs = 0.0;
  double eval_every = 0.0;
  int fid_samples = 0;
  bool force = false;
  bool seed_set = false;
  bool budget_kimg_set = false;
  bool budget_epochs_set = false;
  bool eval_every_set = false;
  bool fid_samples_set = false;
};

int cmd_train(const TrainOpts& o) {
  check_device();
  require(o.recipe.empty() != o.config.empty(), ErrorKind::UsageError,
          "pass exactly one of --recipe or --config");

  trainer::TrainConfig cfg;
  std::string name;
  std::optional<std::string> config_workspace;
  if (!o.recipe.empty()) {
    const trainer::Recipe* match = nullptr;
    std::string names;
    for (const auto& r : trainer::recipes()) {
      if (r.name == o.recipe) match = &r;
      names += (names.empty() ? "" : ", ") + r.name;
    }
    if (!match)
      raise(ErrorKind::UsageError, "unknown recipe \"" + o.recipe + "\"; known recipes: " + names);
    require(!match->is_attack, ErrorKind::UsageError,
            "recipe \"" + o.recipe + "\" is an attack protocol; use the attack command");
    cfg = match->train;
    name = match->name;
  } else {
    RunConfig rc = parse_run_config(read_text_file(o.config));
    require(rc.has_train, ErrorKind::InvalidConfig, "run config has no train section");
    cfg = rc.train;
    if (rc.seed) cfg.seed = *rc.seed;
    config_workspace = rc.workspace;
    name = fs::path(o.config).stem().string();
  }

  if (o.seed_set) cfg.seed = o.seed;
  if (o.budget_kimg_set) {
    cfg.budget = o.budget_kimg;
    cfg.budget_unit = trainer::BudgetUnit::kimg;
  }
  if (o.budget_epochs_set) {
    cfg.budget = o.budget_epochs;
    cfg.budget_unit = trainer::BudgetUnit::epochs;
  }
  if (o.eval_every_set) cfg.eval_every_kimg = o.eval_every;
  if (o.fid_samples_set) cfg.fid_samples = o.fid_samples;
  if (!o.run_name.empty()) name = o.run_name;

  std::string workspace = o.workspace;
  if (workspace.empty() && config_workspace) workspace = *config_workspace;
  if (workspace.empty()) workspace = env_or("PERIOGAN_WORKSPACE", "workspace");

  const auto manifest = corpus::load_manifest(o.manifest);

  if (!o.sweep_lr.empty()) {
    const auto values = parse_double_list(o.sweep_lr, "--sweep-lr");
    const fs::path sweep_dir = fs::path(workspace) / "sweeps" / name;
    if (fs::exists(sweep_dir)) {
      require(o.force, ErrorKind::UsageError,
              sweep_dir.string() +
                  " already exists; run directories are append-only, pass --force to redo");
      fs::remove_all(sweep_dir);
    }
    const auto entries =
        trainer::hyperparameter_sweep(cfg, "learning_rate", values, manifest, sweep_dir.string());
    nlohmann::json j;
    j["sweep_dir"] = sweep_dir.string();
    j["axis"] = "learning_rate";
    int clean = 0;
    for (const auto& e : entries) {
      nlohmann::json row;
      row["value"] = e.value;
      row["diverged"] = e.diverged;
      if (!e.error.empty()) {
        row["error"] = e.error;
      } else if (!e.diverged) {
        row["best_fid"] = e.log.best_fid;
        row["final_kimg"] = e.log.final_kimg;
        ++clean;
      }
      j["entries"].push_back(row);
    }
    std::cout << j.dump(2) << "\n";
    require(clean > 0, ErrorKind::DivergedRun,
            "every sweep entry failed; see " + sweep_dir.string());
    return 0;
  }

  const fs::path run_dir = fs::path(workspace) / "runs" / name;
  if (fs::exists(run_dir / "runlog.csv")) {
    require(o.force, ErrorKind::UsageError,
            run_dir.string() +
                " already holds a run; run directories are append-only, pass --force to redo");
  }
  if (o.force) fs::remove_all(run_dir);

  const auto log = trainer::train(cfg, manifest, run_dir.string());
  nlohmann::json j;
  j["run_dir"] = run_dir.string();
  j["config_hash"] = log.config_hash;
  j["final_kimg"] = log.final_kimg;
  j["generator_steps"] = log.rows.empty() ? 0 : log.rows.size() - 1;
  j["best_fid"] = log.best_fid;
  j["best_fid_kimg"] = log.best_fid_kimg;
  j["best_checkpoint"] = log.best_checkpoint;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string ckpt;
  std::string out;
  int n = 0;
  uint64_t seed = 0;
  int label = 0;
  bool label_set = false;
  bool force = false;
};

int cmd_generate(const GenerateOpts& o) {
  check_device();
  require(o.n >= 1, ErrorKind::UsageError, "--n must be at least 1");
  claim_output(o.out, o.force);
  fs::create_directories(o.out);

  std::optional<int> label;
  if (o.label_set) label = o.label;
  const auto set = trainer::generate(o.ckpt, o.n, o.seed, label);

  std::string csv = "index,file,seed,noise_seed,label,checkpoint,config_hash\n";
  for (size_t i = 0; i < set.images.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof(file), "%06zu.png", i);
    corpus::save_image((fs::path(o.out) / file).string(), set.images[i]);
    const auto& p = set.provenance[i];
    csv += std::to_string(p.index) + "," + file + "," + std::to_string(p.seed) + "," +
           std::to_string(p.noise_seed) + "," + (p.label ? std::to_string(*p.label) : "") + "," +
           p.checkpoint_path + "," + p.config_hash + "\n";
  }
  write_text_file((fs::path(o.out) / "provenance.csv").string(), csv);

  nlohmann::json j;
  j["out"] = o.out;
  j["count"] = set.images.size();
  j["seed"] = o.seed;
  j["checkpoint"] = o.ckpt;
  j["config_hash"] = set.provenance.front().config_hash;
  if (label) j["label"] = *label;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fid

struct FidOpts {
  std::string a;
  std::string b;
  std::string embedder = "tiny2048";
  std::string out;
  int limit = 0;
  bool force = false;
};

int cmd_fid(const FidOpts& o) {
  check_device();
  const auto a = load_dir_images(o.a, o.limit);
  const auto b = load_dir_images(o.b, o.limit);
  const auto emb = quality::Embedder::make(o.embedder);
  const auto report = quality::fid(a.images, b.images, emb);
  const std::string json = quality::fid_report_json(report);
  std::cout << json;
  if (!o.out.empty()) {
    claim_output(o.out, o.force);
    write_text_file(o.out, json);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// sharpness

struct SharpnessOpts {
  std::string dir;
  std::string out;
  int limit = 0;
  bool force = false;
};

int cmd_sharpness(const SharpnessOpts& o) {
  check_device();
  const auto set = load_dir_images(o.dir, o.limit);
  std::string csv = "file,sharpness\n";
  double sum = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < set.images.size(); ++i) {
    const double s = quality::sharpness(set.images[i]);
    csv += set.files[i] + "," + format_number(s) + "\n";
    sum += s;
    mn = std::min(mn, s);
    mx = std::max(mx, s);
  }
  if (!o.out.empty()) {
    claim_output(o.out, o.force);
    write_text_file(o.out, csv);
  }
  nlohmann::json j;
  j["dir"] = o.dir;
  j["count"] = set.images.size();
  j["mean"] = sum / static_cast<double>(set.images.size());
  j["min"] = mn;
  j["max"] = mx;
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tsne

struct TsneOpts {
  std::string a;
  std::string b;
  std::string label_a = "a";
  std::string label_b = "b";
  std::string embedder = "tiny2048";
  std::string out;
  int limit = 0;
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  uint64_t seed = 0;
  bool force = false;
};

int cmd_tsne(const TsneOpts& o) {
  check_device();
  auto a = load_dir_images(o.a, o.limit);
  std::vector<corpus::PixelTensor> all = std::move(a.images);
  std::vector<std::string> labels(all.size(), o.label_a);
  if (!o.b.empty()) {
    auto b = load_dir_images(o.b, o.limit);
    for (auto& img : b.images) all.push_back(std::move(img));
    labels.resize(all.size(), o.label_b);
  }
  const auto emb = quality::Embedder::make(o.embedder);
  const Eigen::MatrixXd features = emb.embed(all);
  quality::TsneParams params;
  params.perplexity = o.perplexity;
  params.iterations = o.iterations;
  params.learning_rate = o.learning_rate;
  params.early_exaggeration = o.exaggeration;
  params.exaggeration_iters = o.exaggeration_iters;
  params.seed = o.seed;
  const auto map = quality::tsne_project(features, labels, params);
  claim_output(o.out, o.force);
  write_text_file(o.out, quality::projection_csv(map));

  nlohmann::json j;
  j["out"] = o.out;
  j["n"] = all.size();
  j["d_f"] = features.cols();
  j["embedder"] = emb.descriptor().id;
  j["perplexity"] = params.perplexity;
  j["iterations"] = params.iterations;
  j["seed"] = params.seed;
  j["final_kl"] = map.final_kl;
  j["accepted_steps"] = map.kl_history.size();
  std::cout << j.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// attack

struct AttackOpts {
  std::string pai;
  std::string bonafide;
  std::string clf = "baseline-cnn";
  std::string out;
  std::string det;
  std::string scores;
  double threshold = 0.5;
  int train_steps = 150;
  uint64_t seed = 0;
  int limit = 0;
  bool force = false;
};

int cmd_attack(const AttackOpts& o) {
  check_device();
  const auto pai = load_dir_images(o.pai, o.limit);
  const auto bona = load_dir_images(o.bonafide, o.limit);

  std::unique_ptr<padlab::PADClassifier> clf;
  if (o.clf.rfind("constant:", 0) == 0) {
    const std::string num = o.clf.substr(9);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == num.size() && !num.empty(), ErrorKind::UsageError,
            "--clf constant:<v> needs a numeric value, got \"" + num + "\"");
    clf = std::make_unique<padlab::ConstantClassifier>(v);
  } else if (o.clf.rfind("file:", 0) == 0) {
    clf = std::make_unique<padlab::FileScoreClassifier>(
        padlab::FileScoreClassifier::from_csv_file(o.clf.substr(5)));
  } else if (o.clf == "baseline-cnn") {
    clf = std::make_unique<padlab::BaselineCnnClassifier>(
        padlab::BaselineCnnClassifier::train(bona.images, o.seed, o.train_steps));
  } else {
    raise(ErrorKind::UsageError,
          "unknown --clf \"" + o.clf + "\"; expected constant:<v>, file:<path> or baseline-cnn");
  }

  const auto report = padlab::unknown_attack_experiment(pai.images, bona.images, *clf, o.threshold);
  auto j = nlohmann::json::parse(padlab::experiment_report_json(report));
  nlohmann::json cli;
  cli["pai_dir"] = o.pai;
  cli["bonafide_dir"] = o.bonafide;
  cli["classifier"] = o.clf;
  if (o.limit > 0) cli["limit"] = o.limit;
  if (o.clf == "baseline-cnn") {
    cli["seed"] = o.seed;
    cli["train_steps"] = o.train_steps;
  }
  j["cli"] = cli;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!o.out.empty()) {
    claim_output(o.out, o.force);
    write_text_file(o.out, text);
  }
  if (!o.det.empty()) {
    claim_output(o.det, o.force);
    write_text_file(o.det, padlab::det_curve_csv(report.curve));
  }
  if (!o.scores.empty()) {
    claim_output(o.scores, o.force);
    write_text_file(o.scores, padlab::scores_csv(report.scores));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
  std::string workspace;
  std::string out;
  bool force = false;
};

struct RunSummary {
  std::string name;
  trainer::TrainConfig cfg;
  std::string config_hash;
  bool has_best = false;
  double best_fid = std::numeric_limits<double>::infinity();
  double best_kimg = 0.0;
  std::string best_checkpoint;
  std::string final_kimg_text = "0";
  std::string curve_csv;  // kimg,fid rows copied textually from runlog.csv
  bool has_attack = false;
  std::string attack_classifier;
  double attack_threshold = 0.0;
  double d_eer = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
};

int cmd_report(const ReportOpts& o) {
  check_device();
  std::string workspace = o.workspace;
  if (workspace.empty()) workspace = env_or("PERIOGAN_WORKSPACE", "workspace");
  const fs::path runs_dir = fs::path(workspace) / "runs";

  std::vector<RunSummary> runs;
  if (fs::is_directory(runs_dir)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(runs_dir))
      if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      if (!fs::exists(dir / "config.json") || !fs::exists(dir / "runlog.csv")) continue;
      RunSummary run;
      run.name = dir.filename().string();
      run.cfg = trainer::TrainConfig::from_json(read_text_file((dir / "config.json").string()));
      run.config_hash = run.cfg.hash();

      // Curve rows keep the exact text of the runlog so the report is
      // byte-comparable against the run directory.
      run.curve_csv = "kimg,fid\n";
      std::stringstream lines(read_text_file((dir / "runlog.csv").string()));
      std::string line;
      bool header = true;
      while (std::getline(lines, line)) {
        if (header) {
          header = false;
          continue;
        }
        if (line.empty()) continue;
        const auto fields = periogan::split_csv_line(line);
        if (fields.size() == 4 && !fields[3].empty())
          run.curve_csv += fields[0] + "," + fields[3] + "\n";
        if (!fields.empty()) run.final_kimg_text = fields[0];
      }

      if (fs::exists(dir / "best.json")) {
        const auto best = nlohmann::json::parse(read_text_file((dir / "best.json").string()));
        run.has_best = true;
        run.best_fid = best.at("fid").get<double>();
        run.best_kimg = best.at("kimg").get<double>();
        run.best_checkpoint = best.at("checkpoint").get<std::string>();
      }
      if (fs::exists(dir / "attack.json")) {
        const auto atk = nlohmann::json::parse(read_text_file((dir / "attack.json").string()));
        run.has_attack = true;
        run.attack_classifier = atk.at("classifier_id").get<std::string>();
        run.attack_threshold = atk.at("threshold").get<double>();
        run.d_eer = atk.at("d_eer").get<double>();
        run.apcer = atk.at("metrics").at("apcer").get<double>();
        run.bpcer = atk.at("metrics").at("bpcer").get<double>();
        run.acer = atk.at("metrics").at("acer").get<double>();
      }
      runs.push_back(std::move(run));
    }
  }
  require(!runs.empty(), ErrorKind::EmptyCorpus,
          "no completed runs under " + runs_dir.string() + "; nothing to report");

  std::stable_sort(runs.begin(), runs.end(),
                   [](const RunSummary& x, const RunSummary& y) { return x.best_fid < y.best_fid; });

  std::string out_dir = o.out;
  if (out_dir.empty()) out_dir = (fs::path(workspace) / "report").string();
  claim_output(out_dir, o.force);
  fs::create_directories(fs::path(out_dir) / "curves");

  std::string benchmark = "run,model_kind,image,best_fid,best_kimg,final_kimg,config_hash,seed\n";
  std::string deer = "run,classifier,threshold,d_eer,apcer,bpcer,acer\n";
  bool any_attack = false;
  for (const auto& run : runs) {
    benchmark += run.name + "," + ganzoo::to_string(run.cfg.model_kind) + "," +
                 std::to_string(run.cfg.image_w) + "x" + std::to_string(run.cfg.image_h) + "," +
                 (run.has_best ? format_number(run.best_fid) : "") + "," +
                 (run.has_best ? format_number(run.best_kimg) : "") + "," + run.final_kimg_text +
                 "," + run.config_hash + "," + std::to_string(run.cfg.seed) + "\n";
    write_text_file((fs::path(out_dir) / "curves" / (run.name + ".csv")).string(), run.curve_csv);
    if (run.has_attack) {
      any_attack = true;
      deer += run.name + "," + run.attack_classifier + "," + format_number(run.attack_threshold) +
              "," + format_number(run.d_eer) + "," + format_number(run.apcer) + "," +
              format_number(run.bpcer) + "," + format_number(run.acer) + "\n";
    }
  }
  write_text_file((fs::path(out_dir) / "benchmark.csv").string(), benchmark);
  if (any_attack) write_text_file((fs::path(out_dir) / "deer.csv").string(), deer);

  std::string md = "# Benchmark report\n\nRuns ranked by best FID (lower is better).\n\n";
  md += "| run | model | image | best FID | at kimg |\n|---|---|---|---|---|\n";
  for (const auto& run : runs)
    md += "| " + run.name + " | " + ganzoo::to_string(run.cfg.model_kind) + " | " +
          std::to_string(run.cfg.image_w) + "x" + std::to_string(run.cfg.image_h) + " | " +
          (run.has_best ? format_number(run.best_fid) : "-") + " | " +
          (run.has_best ? format_number(run.best_kimg) : "-") + " |\n";
  if (any_attack) {
    md += "\n| run | classifier | D-EER | APCER | BPCER | ACER |\n|---|---|---|---|---|---|\n";
    for (const auto& run : runs)
      if (run.has_attack)
        md += "| " + run.name + " | " + run.attack_classifier + " | " + format_number(run.d_eer) +
              " | " + format_number(run.apcer) + " | " + format_number(run.bpcer) + " | " +
              format_number(run.acer) + " |\n";
  }
  write_text_file((fs::path(out_dir) / "index.md").string(), md);

  nlohmann::json j;
  j["workspace"] = workspace;
  j["out"] = out_dir;
  j["runs"] = runs.size();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& run : runs) {
    nlohmann::json row;
    row["run"] = run.name;
    row["model_kind"] = ganzoo::to_string(run.cfg.model_kind);
    row["config_hash"] = run.config_hash;
    row["seed"] = run.cfg.seed;
    if (run.has_best) {
      row["best_fid"] = run.best_fid;
      row["best_kimg"] = run.best_kimg;
      row["best_checkpoint"] = run.best_checkpoint;
    }
    if (run.has_attack) row["d_eer"] = run.d_eer;
    rows.push_back(row);
  }
  j["ranking"] = rows;
  write_text_file((fs::path(out_dir) / "summary.json").string(), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NIR periocular GAN benchmark toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  IngestOpts ingest_opts;
  auto* ingest = app.add_subcommand("ingest", "Scan an image directory into a manifest");
  ingest->add_option("--dir", ingest_opts.dir, "Image directory, scanned recursively")->required();
  ingest->add_option("--labeling", ingest_opts.labeling, "Labeling rules JSON file");
  ingest->add_option("--out", ingest_opts.out, "Manifest output path")->capture_default_str();
  ingest->add_flag("--force", ingest_opts.force, "Replace an existing output");
  ingest->callback([&] { rc = cmd_ingest(ingest_opts); });

  TrainOpts train_opts;
  auto* train = app.add_subcommand("train", "Train a GAN and log FID against the corpus");
  auto* recipe_opt = train->add_option("--recipe", train_opts.recipe, "Named experiment preset");
  auto* config_opt = train->add_option("--config", train_opts.config, "Run config JSON file");
  recipe_opt->excludes(config_opt);
  train->add_option("--manifest", train_opts.manifest, "Corpus manifest from ingest")->required();
  train->add_option("--workspace", train_opts.workspace,
                    "Workspace root (default $PERIOGAN_WORKSPACE or ./workspace)");
  train->add_option("--run-name", train_opts.run_name, "Run directory name (default recipe name)");
  auto* seed_opt = train->add_option("--seed", train_opts.seed, "Override the config seed");
  auto* bk_opt = train->add_option("--budget-kimg", train_opts.budget_kimg,
                                   "Override the budget, in thousands of real images");
  auto* be_opt =
      train->add_option("--budget-epochs", train_opts.budget_epochs, "Override the budget, in epochs");
  bk_opt->excludes(be_opt);
  auto* ee_opt = train->add_option("--eval-every-kimg", train_opts.eval_every,
                                   "Override the FID evaluation cadence");
  auto* fs_opt = train->add_option("--fid-samples", train_opts.fid_samples,
                                   "Override the FID sample count per side");
  train->add_option("--sweep-lr", train_opts.sweep_lr,
                    "Comma list of learning rates; runs an isolated sweep instead of one run");
  train->add_flag("--force", train_opts.force, "Redo an existing run directory");
  train->callback([&] {
    train_opts.seed_set = seed_opt->count() > 0;
    train_opts.budget_kimg_set = bk_opt->count() > 0;
    train_opts.budget_epochs_set = be_opt->count() > 0;
    train_opts.eval_every_set = ee_opt->count() > 0;
    train_opts.fid_samples_set = fs_opt->count() > 0;
    rc = cmd_train(train_opts);
  });

  GenerateOpts gen_opts;
  auto* gen = app.add_subcommand("generate", "Synthesize images from a checkpoint");
  gen->add_option("--ckpt", gen_opts.ckpt, "Checkpoint file")->required();
  gen->add_option("--n", gen_opts.n, "Number of images")->required();
  gen->add_option("--seed", gen_opts.seed, "Latent seed")->capture_default_str();
  auto* label_opt = gen->add_option("--label", gen_opts.label, "Class label for conditional models");
  gen->add_option("--out", gen_opts.out, "Output directory")->required();
  gen->add_flag("--force", gen_opts.force, "Replace an existing output");
  gen->callback([&] {
    gen_opts.label_set = label_opt->count() > 0;
    rc = cmd_generate(gen_opts);
  });

  FidOpts fid_opts;
  auto* fidc = app.add_subcommand("fid", "FID between two image directories");
  fidc->add_option("--a", fid_opts.a, "First image directory")->required();
  fidc->add_option("--b", fid_opts.b, "Second image directory")->required();
  fidc->add_option("--embedder", fid_opts.embedder, "Embedder id")->capture_default_str();
  fidc->add_option("--limit", fid_opts.limit, "Cap images per side, 0 for all")->capture_default_str();
  fidc->add_option("--out", fid_opts.out, "Also write the report JSON here");
  fidc->add_flag("--force", fid_opts.force, "Replace an existing output");
  fidc->callback([&] { rc = cmd_fid(fid_opts); });

  SharpnessOpts sharp_opts;
  auto* sharp = app.add_subcommand("sharpness", "Laplacian-of-Gaussian sharpness per image");
  sharp->add_option("--dir", sharp_opts.dir, "Image directory")->required();
  sharp->add_option("--limit", sharp_opts.limit, "Cap image count, 0 for all")->capture_default_str();
  sharp->add_option("--out", sharp_opts.out, "Write file,sharpness CSV here");
  sharp->add_flag("--force", sharp_opts.force, "Replace an existing output");
  sharp->callback([&] { rc = cmd_sharpness(sharp_opts); });

  TsneOpts tsne_opts;
  auto* tsnec = app.add_subcommand("tsne", "2-D t-SNE projection of embedded images");
  tsnec->add_option("--a", tsne_opts.a, "First image directory")->required();
  tsnec->add_option("--b", tsne_opts.b, "Second image directory, optional");
  tsnec->add_option("--label-a", tsne_opts.label_a, "Label for the first set")->capture_default_str();
  tsnec->add_option("--label-b", tsne_opts.label_b, "Label for the second set")->capture_default_str();
  tsnec->add_option("--embedder", tsne_opts.embedder, "Embedder id")->capture_default_str();
  tsnec->add_option("--limit", tsne_opts.limit, "Cap images per set, 0 for all")->capture_default_str();
  tsnec->add_option("--perplexity", tsne_opts.perplexity, "Perplexity")->capture_default_str();
  tsnec->add_option("--iters", tsne_opts.iterations, "Iterations")->capture_default_str();
  tsnec->add_option("--lr", tsne_opts.learning_rate, "Learning rate")->capture_default_str();
  tsnec->add_option("--exaggeration", tsne_opts.exaggeration, "Early exaggeration factor")
      ->capture_default_str();
  tsnec->add_option("--exaggeration-iters", tsne_opts.exaggeration_iters, "Exaggeration phase length")
      ->capture_default_str();
  tsnec->add_option("--seed", tsne_opts.seed, "Init seed")->capture_default_str();
  tsnec->add_option("--out", tsne_opts.out, "Projection CSV path")->required();
  tsnec->add_flag("--force", tsne_opts.force, "Replace an existing output");
  tsnec->callback([&] { rc = cmd_tsne(tsne_opts); });

  AttackOpts attack_opts;
  auto* attack = app.add_subcommand(
      "attack", "Present a synthetic set to a PAD classifier as an unknown attack");
  attack->add_option("--pai", attack_opts.pai, "Attack image directory")->required();
  attack->add_option("--bonafide", attack_opts.bonafide, "Bona fide image directory")->required();
  attack->add_option("--clf", attack_opts.clf, "constant:<v>, file:<path> or baseline-cnn")
      ->capture_default_str();
  attack->add_option("--threshold", attack_opts.threshold, "Acceptance threshold")
      ->capture_default_str();
  attack->add_option("--train-steps", attack_opts.train_steps, "Baseline classifier training steps")
      ->capture_default_str();
  attack->add_option("--seed", attack_opts.seed, "Baseline classifier seed")->capture_default_str();
  attack->add_option("--limit", attack_opts.limit, "Cap images per set, 0 for all")
      ->capture_default_str();
  attack->add_option("--out", attack_opts.out, "Write the report JSON here");
  attack->add_option("--det", attack_opts.det, "Write the DET curve CSV here");
  attack->add_option("--scores", attack_opts.scores, "Write the per-sample scores CSV here");
  attack->add_flag("--force", attack_opts.force, "Replace existing outputs");
  attack->callback([&] { rc = cmd_attack(attack_opts); });

  ReportOpts report_opts;
  auto* report = app.add_subcommand("report", "Aggregate run directories into benchmark tables");
  report->add_option("--workspace", report_opts.workspace,
                     "Workspace root (default $PERIOGAN_WORKSPACE or ./workspace)");
  report->add_option("--out", report_opts.out, "Report directory (default <workspace>/report)");
  report->add_flag("--force", report_opts.force, "Replace an existing report");
  report->callback([&] { rc = cmd_report(report_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
