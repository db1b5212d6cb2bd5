#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "periogan/corpus/pixel.hpp"
#include "periogan/nn/tensor.hpp"

namespace periogan::quality {

struct EmbedderDescriptor {
  std::string id;
  int d_f = 0;
  int input_w = 0;
  int input_h = 0;
};

/// Fixed feature extractor for FID. Two offline embedders ship:
///   tiny2048   - frozen random-weight CNN, 64x64 in, 2048-d pooled features
///   pixstat64  - 8x8 bilinear thumbnail, 64 raw values
/// "inception-v3-pool3" is recognized but needs a pretrained weight asset
/// that is not bundled, so selecting it raises EmbedError. FID values are
/// only comparable within one embedder id.
class Embedder {
 public:
  static Embedder make(const std::string& id);

  const EmbedderDescriptor& descriptor() const { return desc_; }

  /// (n, d_f) feature matrix, row order equal to input order, deterministic.
  Eigen::MatrixXd embed(const std::vector<corpus::PixelTensor>& images) const;

 private:
  EmbedderDescriptor desc_;
  std::vector<nn::Tensor> conv_w_;  // tiny2048 kernels, (O,I,3,3)
};

}  // namespace periogan::quality
