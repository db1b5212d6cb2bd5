#pragma once

#include <string>
#include <vector>

#include "periogan/util/error.hpp"
#include "periogan/util/rng.hpp"

namespace periogan::corpus {

/// Grayscale image with intensities normalized to [-1, 1], row-major.
struct PixelTensor {
  int height = 0;
  int width = 0;
  std::string layout = "HW";
  std::vector<float> v;

  PixelTensor() = default;
  PixelTensor(int h, int w) : height(h), width(w), v(static_cast<size_t>(h) * w, 0.f) {}

  float& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

/// Decodes an 8-bit image as grayscale; pixel p maps to p/127.5 - 1.
PixelTensor load_image(const std::string& path);

/// Writes as 8-bit grayscale; format chosen from the extension.
void save_image(const std::string& path, const PixelTensor& img);

/// Bilinear resample to target (width, height). Sampling uses half-pixel
/// centers, so resizing to the source dims is the identity bit-exact and
/// constant images stay constant.
PixelTensor resize(const PixelTensor& img, int target_w, int target_h);

enum class Transform { hflip, rotate, brightness, noise };

struct AugmentationPolicy {
  double occurrence_probability = 0.75;
  std::vector<Transform> transforms = {Transform::hflip, Transform::rotate,
                                       Transform::brightness, Transform::noise};
  double max_rotation_deg = 5.0;
  double max_brightness_frac = 0.10;
  double max_noise_sigma = 0.02;
  uint64_t rng_seed = 0;

  void validate() const;
};

/// Applies each transform independently with probability p, in policy order.
/// Parameters are drawn only for transforms that fire, and the image is
/// clamped back to [-1, 1] after each one.
PixelTensor augment(const PixelTensor& img, const AugmentationPolicy& policy, Rng& rng);

}  // namespace periogan::corpus
