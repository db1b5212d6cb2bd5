#include "periogan/padlab/experiment.hpp"

#include <sstream>

#include <json.hpp>

#include "periogan/util/error.hpp"

namespace periogan::padlab {

namespace {

std::string pad_id(const char* prefix, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s/%05zu", prefix, i);
  return buf;
}

}  // namespace

ExperimentReport unknown_attack_experiment(const std::vector<corpus::PixelTensor>& pai,
                                           const std::vector<corpus::PixelTensor>& bonafide,
                                           const PADClassifier& clf, double threshold) {
  require(!pai.empty(), ErrorKind::MissingClass, "attack set is empty");
  require(!bonafide.empty(), ErrorKind::MissingClass, "bona fide set is empty");

  std::vector<LabeledImage> samples;
  samples.reserve(pai.size() + bonafide.size());
  for (size_t i = 0; i < pai.size(); ++i)
    samples.push_back({pad_id("pai", i), GroundTruth::attack, pai[i]});
  for (size_t i = 0; i < bonafide.size(); ++i)
    samples.push_back({pad_id("bona", i), GroundTruth::bonafide, bonafide[i]});

  auto scored = score_set(clf, samples);

  ExperimentReport r;
  r.classifier_id = clf.id();
  r.threshold = threshold;
  r.scores = std::move(scored.scores);
  r.failures = std::move(scored.failures);
  r.metrics = iso_metrics(r.scores, threshold);
  r.curve = det_curve(r.scores);
  r.eer = d_eer(r.curve);
  r.metrics_at_eer = iso_metrics(r.scores, r.eer.threshold);
  r.fraction_pai_bonafide = r.metrics.apcer;
  return r;
}

std::string experiment_report_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["classifier_id"] = report.classifier_id;
  j["decision_rule"] = "score >= threshold counts as bona fide (ties accepted)";
  j["threshold"] = report.threshold;
  j["fraction_pai_bonafide"] = report.fraction_pai_bonafide;
  auto metrics_json = [](const ISOMetricsReport& m) {
    nlohmann::json o;
    o["threshold"] = m.threshold;
    o["apcer"] = m.apcer;
    o["bpcer"] = m.bpcer;
    o["acer"] = m.acer;
    o["n_attack"] = m.n_attack;
    o["n_bonafide"] = m.n_bonafide;
    o["attack_accepted"] = m.attack_accepted;
    o["bonafide_rejected"] = m.bonafide_rejected;
    return o;
  };
  j["metrics"] = metrics_json(report.metrics);
  j["metrics_at_eer"] = metrics_json(report.metrics_at_eer);
  j["d_eer"] = report.eer.eer;
  j["d_eer_threshold"] = report.eer.threshold;
  j["n_scores"] = report.scores.size();
  j["n_failures"] = report.failures.size();
  for (const auto& f : report.failures)
    j["failures"].push_back({{"sample_id", f.sample_id}, {"message", f.message}});
  return j.dump(2) + "\n";
}

std::string det_curve_csv(const DETCurve& curve) {
  std::ostringstream out;
  out << "threshold,apcer,bpcer\n";
  out.precision(17);
  for (const auto& p : curve.points)
    out << p.threshold << ',' << p.apcer << ',' << p.bpcer << "\n";
  return out.str();
}

std::string scores_csv(const std::vector<PADScore>& scores) {
  std::ostringstream out;
  out << "sample_id,ground_truth,score\n";
  out.precision(17);
  for (const auto& s : scores)
    out << s.sample_id << ',' << to_string(s.ground_truth) << ',' << s.score << "\n";
  return out.str();
}

}  // namespace periogan::padlab
