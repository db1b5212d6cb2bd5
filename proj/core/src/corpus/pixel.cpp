#include "periogan/corpus/pixel.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

namespace periogan::corpus {

PixelTensor load_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
  require(!m.empty(), ErrorKind::IOFailure, "cannot decode image: " + path);
  PixelTensor img(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) img.at(y, x) = static_cast<float>(row[x]) / 127.5f - 1.f;
  }
  return img;
}

void save_image(const std::string& path, const PixelTensor& img) {
  cv::Mat m(img.height, img.width, CV_8UC1);
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      const float u = (std::clamp(img.at(y, x), -1.f, 1.f) + 1.f) * 127.5f;
      row[x] = static_cast<uint8_t>(std::lround(u));
    }
  }
  require(cv::imwrite(path, m), ErrorKind::IOFailure, "cannot write image: " + path);
}

namespace {

inline float sample_clamped(const PixelTensor& img, int y, int x) {
  y = std::clamp(y, 0, img.height - 1);
  x = std::clamp(x, 0, img.width - 1);
  return img.at(y, x);
}

inline float bilinear(const PixelTensor& img, float sy, float sx) {
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const float fy = sy - static_cast<float>(y0);
  const float fx = sx - static_cast<float>(x0);
  const float a = sample_clamped(img, y0, x0);
  const float b = sample_clamped(img, y0, x0 + 1);
  const float c = sample_clamped(img, y0 + 1, x0);
  const float d = sample_clamped(img, y0 + 1, x0 + 1);
  return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx;
}

}  // namespace

PixelTensor resize(const PixelTensor& img, int target_w, int target_h) {
  require(target_w > 0 && target_h > 0, ErrorKind::InvalidTarget,
          "resize target must be positive");
  if (target_w == img.width && target_h == img.height) return img;
  PixelTensor out(target_h, target_w);
  const float sy = static_cast<float>(img.height) / static_cast<float>(target_h);
  const float sx = static_cast<float>(img.width) / static_cast<float>(target_w);
  for (int y = 0; y < target_h; ++y) {
    const float src_y = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
    for (int x = 0; x < target_w; ++x) {
      const float src_x = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
      out.at(y, x) = bilinear(img, src_y, src_x);
    }
  }
  return out;
}

void AugmentationPolicy::validate() const {
  require(occurrence_probability >= 0.0 && occurrence_probability <= 1.0,
          ErrorKind::InvalidConfig, "occurrence_probability outside [0,1]");
  require(max_rotation_deg >= 0 && std::isfinite(max_rotation_deg) &&
              max_brightness_frac >= 0 && std::isfinite(max_brightness_frac) &&
              max_noise_sigma >= 0 && std::isfinite(max_noise_sigma),
          ErrorKind::InvalidConfig, "augmentation parameter ranges must be bounded");
}

namespace {

void clamp_all(PixelTensor& img) {
  for (auto& x : img.v) x = std::clamp(x, -1.f, 1.f);
}

PixelTensor hflip(const PixelTensor& img) {
  PixelTensor out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(y, img.width - 1 - x);
  return out;
}

PixelTensor rotate(const PixelTensor& img, double deg) {
  const double rad = deg * 3.14159265358979323846 / 180.0;
  const float cs = static_cast<float>(std::cos(rad));
  const float sn = static_cast<float>(std::sin(rad));
  const float cy = static_cast<float>(img.height - 1) / 2.f;
  const float cx = static_cast<float>(img.width - 1) / 2.f;
  PixelTensor out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float dy = static_cast<float>(y) - cy;
      const float dx = static_cast<float>(x) - cx;
      // Inverse rotation; border handled by edge replication in bilinear().
      const float sy2 = cy + cs * dy - sn * dx;
      const float sx2 = cx + sn * dy + cs * dx;
      out.at(y, x) = bilinear(img, sy2, sx2);
    }
  }
  return out;
}

}  // namespace

PixelTensor augment(const PixelTensor& img, const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  PixelTensor out = img;
  for (Transform t : policy.transforms) {
    if (!rng.bernoulli(policy.occurrence_probability)) continue;
    switch (t) {
      case Transform::hflip:
        out = hflip(out);
        break;
      case Transform::rotate:
        out = rotate(out, rng.uniform(-policy.max_rotation_deg, policy.max_rotation_deg));
        break;
      case Transform::brightness: {
        // Scale in [0,1] intensity space so "brightness +10%" means what a
        // photographer expects, then map back.
        const float f = 1.f + static_cast<float>(
                                  rng.uniform(-policy.max_brightness_frac,
                                              policy.max_brightness_frac));
        for (auto& x : out.v) x = ((x + 1.f) * 0.5f * f) * 2.f - 1.f;
        break;
      }
      case Transform::noise: {
        const double sigma = rng.uniform(0.0, policy.max_noise_sigma);
        for (auto& x : out.v) x += static_cast<float>(rng.normal(0.0, sigma));
        break;
      }
    }
    clamp_all(out);
  }
  return out;
}

}  // namespace periogan::corpus
