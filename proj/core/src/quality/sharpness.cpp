#include "periogan/quality/sharpness.hpp"

#include <array>
#include <cmath>

namespace periogan::quality {

namespace {

constexpr int kSize = 9;
constexpr int kHalf = kSize / 2;

std::array<double, kSize * kSize> log_kernel() {
  constexpr double sigma = 1.5;
  const double s2 = sigma * sigma;
  std::array<double, kSize * kSize> k{};
  double sum = 0.0;
  for (int y = -kHalf; y <= kHalf; ++y)
    for (int x = -kHalf; x <= kHalf; ++x) {
      const double r2 = static_cast<double>(x * x + y * y);
      const double v = (r2 - 2.0 * s2) / (s2 * s2) * std::exp(-r2 / (2.0 * s2));
      k[static_cast<size_t>((y + kHalf) * kSize + (x + kHalf))] = v;
      sum += v;
    }
  for (auto& v : k) v -= sum / (kSize * kSize);
  return k;
}

}  // namespace

double sharpness(const corpus::PixelTensor& img) {
  if (img.height < kSize || img.width < kSize) return 0.0;
  static const auto kernel = log_kernel();

  const int64_t npix = static_cast<int64_t>(img.height) * img.width;
  double mean = 0.0;
  for (float v : img.v) mean += static_cast<double>(v);
  mean /= static_cast<double>(npix);

  double acc = 0.0;
  const int oh = img.height - kSize + 1;
  const int ow = img.width - kSize + 1;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double r = 0.0;
      for (int ky = 0; ky < kSize; ++ky)
        for (int kx = 0; kx < kSize; ++kx) {
          const double p =
              static_cast<double>(img.v[static_cast<size_t>((y + ky) * img.width + x + kx)]) -
              mean;
          r += kernel[static_cast<size_t>(ky * kSize + kx)] * p;
        }
      acc += r * r;
    }
  return 100.0 * acc / (static_cast<double>(oh) * ow);
}

}  // namespace periogan::quality
