#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace periogan::quality {

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  uint64_t seed = 0;
};

struct ProjectionMap {
  Eigen::MatrixXd points;  // (n, 2)
  std::vector<std::string> labels;
  TsneParams params;
  /// KL divergence per accepted step after the exaggeration phase ends;
  /// non-increasing by construction (backtracking line search).
  std::vector<double> kl_history;
  double final_kl = 0.0;
};

/// Exact (all-pairs) t-SNE to 2-D with a fixed seed. The exaggeration phase
/// uses the usual momentum updates; afterwards plain gradient descent with a
/// backtracking line search keeps the KL divergence monotone.
/// n < 3 * perplexity -> InvalidPerplexity; label count must be 0 or n.
ProjectionMap tsne_project(const Eigen::MatrixXd& features,
                           const std::vector<std::string>& labels,
                           const TsneParams& params = {});

/// x,y,label rows for plotting.
std::string projection_csv(const ProjectionMap& map);

}  // namespace periogan::quality
