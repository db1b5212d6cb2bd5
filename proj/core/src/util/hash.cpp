#include "periogan/util/hash.hpp"

namespace periogan {

std::string hex64(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string digest_string(std::string_view text) {
  return "fnv1a64:" + hex64(fnv1a64(text));
}

}  // namespace periogan
