#include "periogan/padlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "periogan/util/error.hpp"

namespace periogan::padlab {

std::string to_string(GroundTruth g) {
  return g == GroundTruth::bonafide ? "bonafide" : "attack";
}

GroundTruth ground_truth_from_string(const std::string& s) {
  if (s == "bonafide") return GroundTruth::bonafide;
  if (s == "attack") return GroundTruth::attack;
  raise(ErrorKind::InvalidConfig, "unknown ground truth: " + s);
}

namespace {

void check_scores(const std::vector<PADScore>& scores) {
  int64_t attacks = 0, bona = 0;
  for (const auto& s : scores) {
    require(s.score >= 0.0 && s.score <= 1.0, ErrorKind::DomainError,
            "PAD score outside [0,1]: " + s.sample_id);
    (s.ground_truth == GroundTruth::attack ? attacks : bona) += 1;
  }
  require(attacks > 0 && bona > 0, ErrorKind::MissingClass,
          "iso metrics need both classes present");
}

}  // namespace

ISOMetricsReport iso_metrics(const std::vector<PADScore>& scores, double threshold) {
  require(!std::isnan(threshold), ErrorKind::DomainError, "threshold is NaN");
  check_scores(scores);
  ISOMetricsReport r;
  r.threshold = threshold;
  for (const auto& s : scores) {
    if (s.ground_truth == GroundTruth::attack) {
      r.n_attack += 1;
      if (s.score >= threshold) r.attack_accepted += 1;
    } else {
      r.n_bonafide += 1;
      if (s.score < threshold) r.bonafide_rejected += 1;
    }
  }
  r.apcer = static_cast<double>(r.attack_accepted) / static_cast<double>(r.n_attack);
  r.bpcer = static_cast<double>(r.bonafide_rejected) / static_cast<double>(r.n_bonafide);
  r.acer = (r.apcer + r.bpcer) / 2.0;
  return r;
}

DETCurve det_curve(const std::vector<PADScore>& scores) {
  check_scores(scores);
  std::set<double> distinct;
  std::vector<double> attacks, bona;
  for (const auto& s : scores) {
    distinct.insert(s.score);
    (s.ground_truth == GroundTruth::attack ? attacks : bona).push_back(s.score);
  }
  std::sort(attacks.begin(), attacks.end());
  std::sort(bona.begin(), bona.end());

  std::vector<double> thresholds;
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  thresholds.insert(thresholds.end(), distinct.begin(), distinct.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  // Sorted sweep; the counts (and their quotients) are exactly what
  // iso_metrics would produce at each threshold, just without the n^2 rescan.
  DETCurve curve;
  for (double t : thresholds) {
    const auto accepted = attacks.end() - std::lower_bound(attacks.begin(), attacks.end(), t);
    const auto rejected = std::lower_bound(bona.begin(), bona.end(), t) - bona.begin();
    const double apcer =
        static_cast<double>(accepted) / static_cast<double>(attacks.size());
    const double bpcer = static_cast<double>(rejected) / static_cast<double>(bona.size());
    if (!curve.points.empty() && curve.points.back().apcer == apcer &&
        curve.points.back().bpcer == bpcer)
      continue;
    curve.points.push_back({t, apcer, bpcer});
  }
  return curve;
}

EERResult d_eer(const DETCurve& curve) {
  require(!curve.points.empty(), ErrorKind::MissingClass, "empty DET curve");
  EERResult best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : curve.points) {
    const double gap = std::abs(p.apcer - p.bpcer);
    if (gap < best_gap) {
      best_gap = gap;
      best.eer = (p.apcer + p.bpcer) / 2.0;
      best.threshold = p.threshold;
    }
  }
  return best;
}

}  // namespace periogan::padlab
