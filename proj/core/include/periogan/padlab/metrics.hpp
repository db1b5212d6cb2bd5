#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace periogan::padlab {

enum class GroundTruth { bonafide, attack };

std::string to_string(GroundTruth g);
GroundTruth ground_truth_from_string(const std::string& s);

/// One scored presentation. Higher score means more bona fide; decisions use
/// score >= threshold => bona fide, so a tie at the threshold is accepted.
struct PADScore {
  std::string sample_id;
  GroundTruth ground_truth = GroundTruth::bonafide;
  double score = 0.0;  // [0,1]
};

struct ISOMetricsReport {
  double threshold = 0.5;
  double apcer = 0.0;  // attacks accepted as bona fide / attacks
  double bpcer = 0.0;  // bona fide rejected / bona fide
  double acer = 0.0;   // (apcer + bpcer) / 2, exactly
  int64_t n_attack = 0;
  int64_t n_bonafide = 0;
  int64_t attack_accepted = 0;
  int64_t bonafide_rejected = 0;
};

/// Both classes must be present (MissingClass); scores must lie in [0,1]
/// (DomainError). The threshold itself may be any non-NaN real, including
/// the +-inf sentinels used by DET curves.
ISOMetricsReport iso_metrics(const std::vector<PADScore>& scores, double threshold);

struct DETPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

/// Points ordered by increasing threshold: apcer non-increasing, bpcer
/// non-decreasing along the list. Thresholds cover every distinct score plus
/// -inf/+inf sentinels; consecutive points with equal rates are deduplicated
/// (first kept).
struct DETCurve {
  std::vector<DETPoint> points;
};

DETCurve det_curve(const std::vector<PADScore>& scores);

struct EERResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Operating point where apcer meets bpcer. On the discrete staircase this is
/// the point minimizing |apcer - bpcer|; the midpoint of the two rates there
/// is returned. Separable inputs give exactly 0.
EERResult d_eer(const DETCurve& curve);

}  // namespace periogan::padlab
