#include "periogan/trainer/recipes.hpp"

#include <nlohmann/json.hpp>

#include "periogan/util/error.hpp"

namespace periogan::trainer {

using ganzoo::ModelKind;

namespace {

TrainConfig base_320x240(ModelKind kind) {
  TrainConfig c;
  c.model_kind = kind;
  c.image_w = 320;
  c.image_h = 240;
  c.batch_size = 60;
  c.eval_every_kimg = 200.0;
  c.seed = 42;
  return c;
}

TrainConfig toy(ModelKind kind, double lr) {
  TrainConfig c;
  c.model_kind = kind;
  c.image_w = 32;
  c.image_h = 32;
  c.learning_rate = lr;
  c.optimizer = kind == ModelKind::wgan ? Optimizer::rmsprop : Optimizer::adam;
  c.batch_size = 32;
  c.budget = 64.0;
  c.budget_unit = BudgetUnit::kimg;
  c.eval_every_kimg = 16.0;
  c.seed = 42;
  c.d_z = 64;
  c.base_ch = 16;
  c.fid_samples = 256;
  c.sample_grid = 9;
  return c;
}

std::vector<Recipe> build() {
  std::vector<Recipe> out;

  {
    Recipe r;
    r.name = "exp1-cgan-80x160";
    r.description = "cGAN on 80x160 crops, gender-conditional, 500 epochs";
    r.train = base_320x240(ModelKind::cgan);
    r.train.image_w = 80;
    r.train.image_h = 160;
    r.train.learning_rate = 2e-4;
    r.train.budget = 500.0;
    r.train.budget_unit = BudgetUnit::epochs;
    r.train.fid_samples = 9000;
    out.push_back(r);
  }
  {
    Recipe r;
    r.name = "exp1-cgan-320x240";
    r.description = "cGAN at full 320x240 resolution, 500 epochs";
    r.train = base_320x240(ModelKind::cgan);
    r.train.learning_rate = 2e-4;
    r.train.budget = 500.0;
    r.train.budget_unit = BudgetUnit::epochs;
    r.train.fid_samples = 9000;
    out.push_back(r);
  }
  {
    Recipe r;
    r.name = "exp2-wgan";
    r.description = "WGAN, lr 1e-5, RMSprop, batch 60, weight clip 0.01";
    r.train = base_320x240(ModelKind::wgan);
    r.train.learning_rate = 1e-5;
    r.train.optimizer = Optimizer::rmsprop;
    r.train.budget = 500.0;
    r.train.budget_unit = BudgetUnit::epochs;
    r.train.fid_samples = 9000;
    out.push_back(r);
  }
  {
    Recipe r;
    r.name = "exp3-wgangp";
    r.description = "WGAN-GP, lr 1e-4, Adam, batch 60, lambda 10";
    r.train = base_320x240(ModelKind::wgan_gp);
    r.train.learning_rate = 1e-4;
    r.train.budget = 1000.0;
    r.train.budget_unit = BudgetUnit::epochs;
    r.train.fid_samples = 12000;
    out.push_back(r);
  }
  {
    Recipe r;
    r.name = "exp4-stylegan2";
    // 256x256 stands in for the published 320x240: the skip-connection
    // synthesis runs at power-of-two square resolutions only.
    r.description = "StyleGAN2-lite, lr 2.5e-3, Adam, FID every 200 kimg";
    r.train = base_320x240(ModelKind::stylegan2_lite);
    r.train.image_w = 256;
    r.train.image_h = 256;
    r.train.learning_rate = 2.5e-3;
    r.train.budget = 3600.0;
    r.train.budget_unit = BudgetUnit::kimg;
    r.train.d_z = 512;
    r.train.fid_samples = 3000;
    out.push_back(r);
  }
  {
    Recipe r;
    r.name = "unknown-attack";
    r.description = "score synthetic PAIs against a PAD classifier at 0.5";
    r.is_attack = true;
    out.push_back(r);
  }

  out.push_back({"toy-cgan", "desk-scale cGAN smoke run at 32x32", false,
                 toy(ModelKind::cgan, 2e-4)});
  out.push_back({"toy-wgan", "desk-scale WGAN smoke run at 32x32", false,
                 toy(ModelKind::wgan, 5e-5)});
  out.push_back({"toy-wgangp", "desk-scale WGAN-GP smoke run at 32x32", false,
                 toy(ModelKind::wgan_gp, 1e-4)});
  {
    Recipe r;
    r.name = "toy-stylegan2";
    r.description = "desk-scale StyleGAN2-lite smoke run at 32x32";
    r.train = toy(ModelKind::stylegan2_lite, 2.5e-3);
    r.train.d_z = 512;
    out.push_back(r);
  }
  return out;
}

}  // namespace

const std::vector<Recipe>& recipes() {
  static const std::vector<Recipe> all = build();
  return all;
}

const Recipe& find_recipe(const std::string& name) {
  for (const auto& r : recipes())
    if (r.name == name) return r;
  std::string known;
  for (const auto& r : recipes()) known += (known.empty() ? "" : ", ") + r.name;
  raise(ErrorKind::InvalidConfig, "unknown recipe: " + name + " (known: " + known + ")");
}

std::string recipe_json(const Recipe& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["description"] = r.description;
  if (r.is_attack) {
    j["attack"]["classifier"] = r.classifier;
    j["attack"]["threshold"] = r.threshold;
  } else {
    j["train"] = nlohmann::json::parse(r.train.to_json());
  }
  return j.dump(2) + "\n";
}

std::string all_recipes_json() {
  std::string out;
  for (const auto& r : recipes()) out += recipe_json(r);
  return out;
}

}  // namespace periogan::trainer
