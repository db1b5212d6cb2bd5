#include "periogan/corpus/batches.hpp"

#include <cstring>

#include "periogan/util/hash.hpp"

namespace periogan::corpus {

std::vector<std::vector<int>> batch_plan(int n, int size, uint64_t shuffle_seed) {
  require(size >= 1, ErrorKind::InvalidBatchSize, "batch size must be >= 1");
  require(n >= 0, ErrorKind::InvalidBatchSize, "negative record count");
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng(shuffle_seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(rng.below(static_cast<uint64_t>(i) + 1))]);
  std::vector<std::vector<int>> plan;
  for (int off = 0; off < n; off += size) {
    const int take = std::min(size, n - off);
    plan.emplace_back(order.begin() + off, order.begin() + off + take);
  }
  return plan;
}

BatchLoader::BatchLoader(const Manifest& manifest, int target_w, int target_h,
                         int batch_size, uint64_t shuffle_seed,
                         std::optional<AugmentationPolicy> augmentation)
    : manifest_(&manifest),
      target_w_(target_w),
      target_h_(target_h),
      batch_size_(batch_size),
      seed_(shuffle_seed),
      augmentation_(std::move(augmentation)) {
  require(!manifest.records.empty(), ErrorKind::EmptyCorpus, "manifest has no records");
  require(target_w > 0 && target_h > 0, ErrorKind::InvalidTarget, "bad target size");
  if (augmentation_) augmentation_->validate();
  start_epoch(0);
}

void BatchLoader::start_epoch(int epoch) {
  epoch_ = epoch;
  plan_ = batch_plan(static_cast<int>(manifest_->records.size()), batch_size_,
                     mix_seed(seed_, 0x65706f63ULL + static_cast<uint64_t>(epoch)));
}

Batch BatchLoader::load(int batch_index) const {
  const auto& idxs = plan_.at(static_cast<size_t>(batch_index));
  Batch out;
  out.indices = idxs;
  out.images = nn::Tensor({static_cast<int>(idxs.size()), 1, target_h_, target_w_});
  for (size_t i = 0; i < idxs.size(); ++i) {
    const ImageRecord& rec = manifest_->records[static_cast<size_t>(idxs[i])];
    PixelTensor img = resize(load_image(rec.path), target_w_, target_h_);
    if (augmentation_) {
      // Per-(record, epoch) stream: augmentation noise must not depend on
      // batch order, but should differ across epochs.
      Rng arng(mix_seed(mix_seed(augmentation_->rng_seed, fnv1a64(rec.id)),
                        static_cast<uint64_t>(epoch_)));
      img = augment(img, *augmentation_, arng);
    }
    std::memcpy(out.images.data() + i * img.v.size(), img.v.data(),
                img.v.size() * sizeof(float));
  }
  return out;
}

nn::Tensor load_record(const ImageRecord& rec, int target_w, int target_h) {
  PixelTensor img = resize(load_image(rec.path), target_w, target_h);
  return from_pixel(img);
}

PixelTensor to_pixel(const nn::Tensor& t, int batch_index) {
  require(t.ndim() == 4 && t.shape[1] == 1, ErrorKind::ShapeError,
          "to_pixel expects (N,1,H,W)");
  const int h = t.shape[2], w = t.shape[3];
  PixelTensor img(h, w);
  std::memcpy(img.v.data(), t.data() + static_cast<int64_t>(batch_index) * h * w,
              static_cast<size_t>(h) * w * sizeof(float));
  return img;
}

nn::Tensor from_pixel(const PixelTensor& img) {
  nn::Tensor t({1, 1, img.height, img.width});
  std::memcpy(t.data(), img.v.data(), img.v.size() * sizeof(float));
  return t;
}

}  // namespace periogan::corpus
