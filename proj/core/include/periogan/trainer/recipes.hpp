#pragma once

#include <string>
#include <vector>

#include "periogan/trainer/trainer.hpp"

namespace periogan::trainer {

/// Named experiment preset. Train recipes carry a full TrainConfig; the
/// unknown-attack recipe carries the PAD protocol settings instead.
struct Recipe {
  std::string name;
  std::string description;
  bool is_attack = false;
  TrainConfig train;
  std::string classifier = "baseline-cnn";
  double threshold = 0.5;
};

const std::vector<Recipe>& recipes();
const Recipe& find_recipe(const std::string& name);

/// Canonical serialization, one object per recipe; pinned by a golden file so
/// preset hyperparameters cannot drift silently.
std::string recipe_json(const Recipe& r);
std::string all_recipes_json();

}  // namespace periogan::trainer
