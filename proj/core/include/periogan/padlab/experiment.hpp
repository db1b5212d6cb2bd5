#pragma once

#include "periogan/padlab/classifier.hpp"

namespace periogan::padlab {

struct ExperimentReport {
  std::string classifier_id;
  double threshold = 0.5;
  std::vector<PADScore> scores;  // attacks first, then bona fide
  std::vector<ScoreFailure> failures;
  ISOMetricsReport metrics;         // at the configured threshold
  ISOMetricsReport metrics_at_eer;  // at the D-EER threshold
  DETCurve curve;
  EERResult eer;
  /// Share of the attack set accepted as bona fide at the configured
  /// threshold; equals metrics.apcer by construction.
  double fraction_pai_bonafide = 0.0;
};

/// Presents the synthetic set to the classifier as an unknown attack and
/// reports the full ISO 30107-3 picture. Decision rule: score >= threshold
/// counts as bona fide.
ExperimentReport unknown_attack_experiment(const std::vector<corpus::PixelTensor>& pai,
                                           const std::vector<corpus::PixelTensor>& bonafide,
                                           const PADClassifier& clf, double threshold = 0.5);

std::string experiment_report_json(const ExperimentReport& report);
std::string det_curve_csv(const DETCurve& curve);
std::string scores_csv(const std::vector<PADScore>& scores);

}  // namespace periogan::padlab
