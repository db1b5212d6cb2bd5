#include "periogan/padlab/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "periogan/nn/optim.hpp"
#include "periogan/util/csvio.hpp"
#include "periogan/util/error.hpp"
#include "periogan/util/hash.hpp"

namespace periogan::padlab {

ConstantClassifier::ConstantClassifier(double value) : value_(value) {
  require(value >= 0.0 && value <= 1.0, ErrorKind::InvalidConfig,
          "constant classifier value must lie in [0,1]");
}

std::string ConstantClassifier::id() const {
  std::ostringstream s;
  s << "constant:" << value_;
  return s.str();
}

FileScoreClassifier FileScoreClassifier::from_csv_file(const std::string& path) {
  return from_csv_text(read_text_file(path), path);
}

FileScoreClassifier FileScoreClassifier::from_csv_text(const std::string& text,
                                                       const std::string& name) {
  FileScoreClassifier c;
  c.name_ = name;
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::InvalidConfig,
          "empty score file: " + name);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "sample_id,ground_truth,score", ErrorKind::InvalidConfig,
          "score file header must be sample_id,ground_truth,score");
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    require(c1 != std::string::npos && c2 != std::string::npos, ErrorKind::InvalidConfig,
            "malformed score row " + std::to_string(row));
    const std::string id = line.substr(0, c1);
    ground_truth_from_string(line.substr(c1 + 1, c2 - c1 - 1));  // validated, unused
    double v = 0.0;
    try {
      v = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      raise(ErrorKind::InvalidConfig, "bad score value at row " + std::to_string(row));
    }
    require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidConfig,
            "score outside [0,1] at row " + std::to_string(row));
    require(c.scores_.emplace(id, v).second, ErrorKind::InvalidConfig,
            "duplicate sample id in score file: " + id);
  }
  return c;
}

double FileScoreClassifier::score(const LabeledImage& sample) const {
  auto it = scores_.find(sample.id);
  require(it != scores_.end(), ErrorKind::DomainError,
          "no score on file for sample " + sample.id);
  return it->second;
}

corpus::PixelTensor printed_copy_attack(const corpus::PixelTensor& src, Rng& rng) {
  // Print-and-recapture look: lose half the resolution, shift the tone,
  // sprinkle sensor noise.
  auto down = corpus::resize(src, std::max(1, src.width / 2), std::max(1, src.height / 2));
  auto out = corpus::resize(down, src.width, src.height);
  const float shift = static_cast<float>(0.25 * (rng.uniform() - 0.2));
  for (auto& v : out.v)
    v = std::clamp(v + shift + static_cast<float>(rng.normal(0.0, 0.04)), -1.0f, 1.0f);
  return out;
}

corpus::PixelTensor noise_attack(int width, int height, Rng& rng) {
  corpus::PixelTensor img;
  img.width = width;
  img.height = height;
  img.v.resize(static_cast<size_t>(width) * height);
  for (auto& v : img.v) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  return img;
}

namespace {

constexpr int kPadIn = 32;

nn::Tensor to_batch(const std::vector<const corpus::PixelTensor*>& imgs) {
  const int b = static_cast<int>(imgs.size());
  nn::Tensor t({b, 1, kPadIn, kPadIn});
  for (int i = 0; i < b; ++i) {
    auto small = corpus::resize(*imgs[static_cast<size_t>(i)], kPadIn, kPadIn);
    std::copy(small.v.begin(), small.v.end(),
              t.v.begin() + static_cast<int64_t>(i) * kPadIn * kPadIn);
  }
  return t;
}

}  // namespace

nn::Var<float> BaselineCnnClassifier::forward(const nn::Var<float>& x) const {
  auto h = nn::leaky_relu(conv1_(x), 0.2f);
  h = nn::leaky_relu(conv2_(h), 0.2f);
  h = nn::reshape(h, {x.shape()[0], 16 * 8 * 8});
  return head_(h);
}

BaselineCnnClassifier BaselineCnnClassifier::train(
    const std::vector<corpus::PixelTensor>& bonafide, uint64_t seed, int steps) {
  require(!bonafide.empty(), ErrorKind::EmptyCorpus, "baseline training needs bona fide images");
  require(steps >= 1, ErrorKind::InvalidConfig, "steps must be >= 1");

  BaselineCnnClassifier c;
  Rng rng(mix_seed(seed, fnv1a64("pad.baseline")));
  c.conv1_ = nn::Conv2dT<float>(c.ps_, "pad.conv1", 1, 8, 3, {2, 1}, rng, 0.05f);
  c.conv2_ = nn::Conv2dT<float>(c.ps_, "pad.conv2", 8, 16, 3, {2, 1}, rng, 0.05f);
  c.head_ = nn::LinearT<float>(c.ps_, "pad.head", 16 * 8 * 8, 1, rng, 0.02f);

  nn::Adam opt(1e-3f, 0.9f, 0.999f);
  const int half = 8;
  for (int step = 0; step < steps; ++step) {
    std::vector<const corpus::PixelTensor*> bona;
    std::vector<corpus::PixelTensor> attacks;
    for (int i = 0; i < half; ++i) {
      const auto& src = bonafide[rng.below(bonafide.size())];
      bona.push_back(&src);
      attacks.push_back(step % 2 == 0 ? printed_copy_attack(src, rng)
                                      : noise_attack(src.width, src.height, rng));
    }
    std::vector<const corpus::PixelTensor*> att;
    for (const auto& a : attacks) att.push_back(&a);

    auto logits_b = c.forward(nn::constant(to_batch(bona)));
    auto logits_a = c.forward(nn::constant(to_batch(att)));
    auto loss = nn::add(nn::mean_all(nn::softplus(nn::neg(logits_b))),
                        nn::mean_all(nn::softplus(logits_a)));
    c.ps_.zero_grad();
    nn::backward(loss);
    opt.step(c.ps_);
  }
  return c;
}

double BaselineCnnClassifier::score(const LabeledImage& sample) const {
  nn::NoGradGuard ng(false);
  auto logit = forward(nn::constant(to_batch({&sample.image})));
  return 1.0 / (1.0 + std::exp(-static_cast<double>(logit.val().v[0])));
}

ScoreSetResult score_set(const PADClassifier& clf, const std::vector<LabeledImage>& images) {
  ScoreSetResult out;
  for (const auto& img : images) {
    try {
      const double v = clf.score(img);
      require(v >= 0.0 && v <= 1.0, ErrorKind::DomainError,
              "classifier returned a score outside [0,1]");
      out.scores.push_back({img.id, img.label, v});
    } catch (const std::exception& e) {
      out.failures.push_back({img.id, e.what()});
    }
  }
  return out;
}

}  // namespace periogan::padlab
