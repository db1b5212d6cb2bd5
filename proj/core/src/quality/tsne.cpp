#include "periogan/quality/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "periogan/util/error.hpp"
#include "periogan/util/hash.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::quality {

namespace {

constexpr double kPMin = 1e-12;

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = sq.replicate(1, x.rows()) + sq.transpose().replicate(x.rows(), 1) -
                      2.0 * x * x.transpose();
  return d.cwiseMax(0.0);
}

/// Row-stochastic conditional P via per-row binary search on the precision
/// so that every row's entropy matches log(perplexity).
Eigen::MatrixXd conditional_p(const Eigen::MatrixXd& d, double perplexity) {
  const int n = static_cast<int>(d.rows());
  const double target_h = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    Eigen::VectorXd row(n);
    for (int it = 0; it < 64; ++it) {
      double sum = 0.0;
      double weighted = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) {
          row(j) = 0.0;
          continue;
        }
        const double w = std::exp(-beta * d(i, j));
        row(j) = w;
        sum += w;
        weighted += w * d(i, j);
      }
      if (sum <= 0.0) {
        // Everything underflowed; precision is far too high.
        hi = beta;
        beta = 0.5 * (lo + beta);
        continue;
      }
      // H = log(sum) + beta * E[d]
      const double h = std::log(sum) + beta * weighted / sum;
      row /= sum;
      if (std::abs(h - target_h) < 1e-7) break;
      if (h > target_h) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
      } else {
        hi = beta;
        beta = 0.5 * (lo + hi);
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

struct Objective {
  double kl = 0.0;
  Eigen::MatrixXd grad;  // (n, 2)
};

Objective evaluate(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y,
                   bool with_grad) {
  const int n = static_cast<int>(y.rows());
  Eigen::MatrixXd w(n, n);  // (1 + ||yi-yj||^2)^-1
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    w(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double dx = y(i, 0) - y(j, 0);
      const double dy = y(i, 1) - y(j, 1);
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      w(i, j) = v;
      w(j, i) = v;
      z += 2.0 * v;
    }
  }
  z = std::max(z, kPMin);

  Objective out;
  if (with_grad) out.grad = Eigen::MatrixXd::Zero(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = std::max(p(i, j), kPMin);
      const double qij = std::max(w(i, j) / z, kPMin);
      out.kl += pij * std::log(pij / qij);
      if (with_grad) {
        const double f = 4.0 * (pij - qij) * w(i, j);
        out.grad(i, 0) += f * (y(i, 0) - y(j, 0));
        out.grad(i, 1) += f * (y(i, 1) - y(j, 1));
      }
    }
  return out;
}

}  // namespace

ProjectionMap tsne_project(const Eigen::MatrixXd& features,
                           const std::vector<std::string>& labels,
                           const TsneParams& params) {
  const int n = static_cast<int>(features.rows());
  require(params.perplexity > 0.0, ErrorKind::InvalidPerplexity,
          "perplexity must be positive");
  require(static_cast<double>(n) >= 3.0 * params.perplexity, ErrorKind::InvalidPerplexity,
          "t-SNE needs n >= 3*perplexity, got n=" + std::to_string(n));
  require(labels.empty() || labels.size() == static_cast<size_t>(n), ErrorKind::ShapeError,
          "label count must be 0 or n");
  require(params.iterations >= 1 && params.learning_rate > 0.0 &&
              params.early_exaggeration >= 1.0 && params.exaggeration_iters >= 0,
          ErrorKind::InvalidConfig, "bad t-SNE params");

  Eigen::MatrixXd pc = conditional_p(squared_distances(features), params.perplexity);
  Eigen::MatrixXd p = (pc + pc.transpose()) / (2.0 * n);
  p = p.cwiseMax(kPMin);

  Rng rng(mix_seed(params.seed, fnv1a64("tsne.init")));
  Eigen::MatrixXd y(n, 2);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) y(i, k) = rng.normal(0.0, 1e-4);

  ProjectionMap map;
  map.params = params;
  map.labels = labels;

  const int exag_end = std::min(params.exaggeration_iters, params.iterations);

  // Phase 1: exaggerated P, classic momentum + adaptive gains.
  {
    Eigen::MatrixXd pex = p * params.early_exaggeration;
    Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    for (int it = 0; it < exag_end; ++it) {
      auto obj = evaluate(pex, y, true);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) {
          const bool same_sign = (obj.grad(i, k) > 0.0) == (update(i, k) > 0.0);
          gains(i, k) = same_sign ? std::max(gains(i, k) * 0.8, 0.01) : gains(i, k) + 0.2;
          update(i, k) = 0.5 * update(i, k) -
                         params.learning_rate * gains(i, k) * obj.grad(i, k);
        }
      y += update;
      y.rowwise() -= y.colwise().mean();
    }
  }

  // Phase 2: true P, plain descent with backtracking so KL never increases.
  auto cur = evaluate(p, y, true);
  map.kl_history.push_back(cur.kl);
  double step = params.learning_rate;
  for (int it = exag_end; it < params.iterations; ++it) {
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      Eigen::MatrixXd trial = y - step * cur.grad;
      auto next = evaluate(p, trial, true);
      if (next.kl <= cur.kl) {
        y = std::move(trial);
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    map.kl_history.push_back(cur.kl);
    if (!accepted) break;  // gradient vanished; converged
    step = std::min(step * 1.2, params.learning_rate);
  }

  require(y.allFinite(), ErrorKind::DomainError, "t-SNE produced non-finite output");
  map.points = std::move(y);
  map.final_kl = cur.kl;
  return map;
}

std::string projection_csv(const ProjectionMap& map) {
  std::ostringstream out;
  out << "x,y,label\n";
  out.precision(17);
  for (int i = 0; i < map.points.rows(); ++i) {
    out << map.points(i, 0) << ',' << map.points(i, 1) << ',';
    if (!map.labels.empty()) out << map.labels[static_cast<size_t>(i)];
    out << "\n";
  }
  return out.str();
}

}  // namespace periogan::quality
