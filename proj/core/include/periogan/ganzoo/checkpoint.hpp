#pragma once

#include <string>

#include "periogan/ganzoo/models.hpp"

namespace periogan::ganzoo {

struct CheckpointMeta {
  double kimg = 0.0;
  std::string rng_state;
  std::string config_hash;
};

/// Versioned archive: magic, JSON descriptor (architecture + named tensor
/// shapes + meta), raw float32 tensor payloads, trailing FNV-1a checksum.
void save_checkpoint(const std::string& path, const GanModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  GanModel model;
  CheckpointMeta meta;
};

/// Rebuilds the model from the stored descriptor and restores every tensor.
/// A corrupt or truncated file fails the checksum -> ChecksumError.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace periogan::ganzoo
