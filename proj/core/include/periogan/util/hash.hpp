#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace periogan {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

std::string hex64(uint64_t value);

/// Digest of a text blob, as "fnv1a64:<hex>"; used for manifest checksums and
/// config hashes embedded in reports.
std::string digest_string(std::string_view text);

}  // namespace periogan
