#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "periogan/quality/embed.hpp"

namespace periogan::quality {

struct GaussianSummary {
  Eigen::VectorXd u;      // column means, (d_f)
  Eigen::MatrixXd sigma;  // unbiased covariance, symmetrized
  int64_t n = 0;
};

/// InsufficientSamples when the matrix has fewer than two rows.
GaussianSummary gaussian_summary(const Eigen::MatrixXd& features);

/// ||u_a - u_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), computed through the
/// symmetric form sqrt(S_a) S_b sqrt(S_a) in double precision. Negative
/// eigenvalues of the product are clamped; a strongly indefinite product
/// triggers one retry with 1e-6 jitter on both covariances. The result is
/// clamped to >= 0; pass preclamp to observe the raw value.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b,
                        double* preclamp = nullptr);

struct FIDReport {
  double fid = 0.0;
  double fid_preclamp = 0.0;
  std::string embedder_id;
  int d_f = 0;
  int64_t n_a = 0;
  int64_t n_b = 0;
  // FID estimates are biased for small sets; flagged below 2048 per side.
  bool small_sample_warning = false;
};

FIDReport fid(const std::vector<corpus::PixelTensor>& set_a,
              const std::vector<corpus::PixelTensor>& set_b, const Embedder& model);

std::string fid_report_json(const FIDReport& report);
std::string fid_report_csv(const FIDReport& report);

}  // namespace periogan::quality
