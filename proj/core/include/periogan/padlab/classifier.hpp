#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "periogan/corpus/pixel.hpp"
#include "periogan/nn/layers.hpp"
#include "periogan/padlab/metrics.hpp"

namespace periogan::padlab {

struct LabeledImage {
  std::string id;
  GroundTruth label = GroundTruth::bonafide;
  corpus::PixelTensor image;
};

/// Stand-in for an external PAD algorithm: deterministic per (model, image),
/// score in [0,1], higher means more bona fide.
class PADClassifier {
 public:
  virtual ~PADClassifier() = default;
  virtual std::string id() const = 0;
  virtual double score(const LabeledImage& sample) const = 0;
};

/// Scores every sample with the same value; "constant:<v>".
class ConstantClassifier : public PADClassifier {
 public:
  explicit ConstantClassifier(double value);
  std::string id() const override;
  double score(const LabeledImage&) const override { return value_; }

 private:
  double value_;
};

/// Adapter over externally produced scores keyed by sample id. CSV format:
/// header sample_id,ground_truth,score then one row per sample.
class FileScoreClassifier : public PADClassifier {
 public:
  static FileScoreClassifier from_csv_file(const std::string& path);
  static FileScoreClassifier from_csv_text(const std::string& text, const std::string& name);

  std::string id() const override { return "file:" + name_; }
  double score(const LabeledImage& sample) const override;

 private:
  std::string name_;
  std::map<std::string, double> scores_;
};

/// Small bundled CNN trained against attacks synthesized on the fly
/// (printed-copy degradation and pure noise).
class BaselineCnnClassifier : public PADClassifier {
 public:
  static BaselineCnnClassifier train(const std::vector<corpus::PixelTensor>& bonafide,
                                     uint64_t seed, int steps = 150);

  std::string id() const override { return "baseline-cnn"; }
  double score(const LabeledImage& sample) const override;

 private:
  BaselineCnnClassifier() = default;
  nn::Var<float> forward(const nn::Var<float>& x) const;

  nn::ParamSet<float> ps_;
  nn::Conv2dT<float> conv1_, conv2_;
  nn::LinearT<float> head_;
};

/// Synthetic attack generators used for baseline training and toy protocols.
corpus::PixelTensor printed_copy_attack(const corpus::PixelTensor& src, Rng& rng);
corpus::PixelTensor noise_attack(int width, int height, Rng& rng);

struct ScoreFailure {
  std::string sample_id;
  std::string message;
};

struct ScoreSetResult {
  std::vector<PADScore> scores;  // order preserved, failed samples omitted
  std::vector<ScoreFailure> failures;
};

/// One PADScore per image in input order. A classifier failure on a sample
/// becomes a failure record and the run continues.
ScoreSetResult score_set(const PADClassifier& clf, const std::vector<LabeledImage>& images);

}  // namespace periogan::padlab
