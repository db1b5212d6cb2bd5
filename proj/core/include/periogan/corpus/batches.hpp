#pragma once

#include <optional>
#include <vector>

#include "periogan/corpus/manifest.hpp"
#include "periogan/corpus/pixel.hpp"
#include "periogan/nn/tensor.hpp"

namespace periogan::corpus {

/// Deterministic epoch partition: every index appears exactly once, the final
/// batch may be partial, order is a pure function of (n, size, seed).
std::vector<std::vector<int>> batch_plan(int n, int size, uint64_t shuffle_seed);

struct Batch {
  nn::Tensor images;         // (N, 1, H, W) in [-1, 1]
  std::vector<int> indices;  // manifest record indices in batch order
};

/// Loads, resizes and (optionally) augments manifest records batch by batch.
class BatchLoader {
 public:
  BatchLoader(const Manifest& manifest, int target_w, int target_h, int batch_size,
              uint64_t shuffle_seed, std::optional<AugmentationPolicy> augmentation = {});

  int batch_count() const { return static_cast<int>(plan_.size()); }
  Batch load(int batch_index) const;

  /// Reshuffles for the next epoch; seed derived from (base seed, epoch).
  void start_epoch(int epoch);

 private:
  const Manifest* manifest_;
  int target_w_, target_h_;
  int batch_size_;
  uint64_t seed_;
  std::optional<AugmentationPolicy> augmentation_;
  std::vector<std::vector<int>> plan_;
  int epoch_ = 0;
};

/// Single record -> (1,1,H,W)-shaped pixels at the target size.
nn::Tensor load_record(const ImageRecord& rec, int target_w, int target_h);

PixelTensor to_pixel(const nn::Tensor& t, int batch_index = 0);
nn::Tensor from_pixel(const PixelTensor& img);

}  // namespace periogan::corpus
