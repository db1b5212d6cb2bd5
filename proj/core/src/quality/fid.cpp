#include "periogan/quality/fid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "periogan/util/error.hpp"

namespace periogan::quality {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Tr((S_a S_b)^(1/2)) via the similar symmetric matrix sqrt(S_a) S_b sqrt(S_a).
/// Returns false when the product is indefinite beyond numerical noise.
bool trace_sqrt_product(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb,
                        double* out) {
  Eigen::MatrixXd rs = psd_sqrt(sa);
  Eigen::MatrixXd m = rs * sb * rs;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, std::abs(ev(ev.size() - 1)));
  if (ev(0) < -1e-9 * scale) return false;
  *out = ev.cwiseMax(0.0).cwiseSqrt().sum();
  return true;
}

}  // namespace

GaussianSummary gaussian_summary(const Eigen::MatrixXd& features) {
  const int64_t n = features.rows();
  require(n >= 2, ErrorKind::InsufficientSamples,
          "gaussian_summary needs at least 2 samples, got " + std::to_string(n));
  GaussianSummary s;
  s.n = n;
  s.u = features.colwise().mean();
  Eigen::MatrixXd centered = features.rowwise() - s.u.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b,
                        double* preclamp) {
  require(a.u.size() == b.u.size() && a.sigma.rows() == b.sigma.rows() &&
              a.sigma.cols() == b.sigma.cols(),
          ErrorKind::ShapeError, "frechet_distance: dimension mismatch");
  const double mean_term = (a.u - b.u).squaredNorm();

  double tr_sqrt = 0.0;
  Eigen::MatrixXd sa = a.sigma;
  Eigen::MatrixXd sb = b.sigma;
  if (!trace_sqrt_product(sa, sb, &tr_sqrt)) {
    const double eps = 1e-6;
    sa.diagonal().array() += eps;
    sb.diagonal().array() += eps;
    trace_sqrt_product(sa, sb, &tr_sqrt);
  }

  const double raw = mean_term + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
  if (preclamp) *preclamp = raw;
  return std::max(raw, 0.0);
}

FIDReport fid(const std::vector<corpus::PixelTensor>& set_a,
              const std::vector<corpus::PixelTensor>& set_b, const Embedder& model) {
  require(set_a.size() >= 2 && set_b.size() >= 2, ErrorKind::InsufficientSamples,
          "fid needs at least 2 images per side");
  FIDReport r;
  r.embedder_id = model.descriptor().id;
  r.d_f = model.descriptor().d_f;
  r.n_a = static_cast<int64_t>(set_a.size());
  r.n_b = static_cast<int64_t>(set_b.size());
  r.small_sample_warning = r.n_a < 2048 || r.n_b < 2048;
  auto ga = gaussian_summary(model.embed(set_a));
  auto gb = gaussian_summary(model.embed(set_b));
  r.fid = frechet_distance(ga, gb, &r.fid_preclamp);
  return r;
}

std::string fid_report_json(const FIDReport& report) {
  nlohmann::json j;
  j["fid"] = report.fid;
  j["fid_preclamp"] = report.fid_preclamp;
  j["embedder_id"] = report.embedder_id;
  j["d_f"] = report.d_f;
  j["n_a"] = report.n_a;
  j["n_b"] = report.n_b;
  j["small_sample_warning"] = report.small_sample_warning;
  return j.dump(2) + "\n";
}

std::string fid_report_csv(const FIDReport& report) {
  std::ostringstream out;
  out << "fid,fid_preclamp,embedder_id,d_f,n_a,n_b,small_sample_warning\n";
  out.precision(17);
  out << report.fid << ',' << report.fid_preclamp << ',' << report.embedder_id << ','
      << report.d_f << ',' << report.n_a << ',' << report.n_b << ','
      << (report.small_sample_warning ? 1 : 0) << "\n";
  return out.str();
}

}  // namespace periogan::quality
