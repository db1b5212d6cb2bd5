#include "periogan/util/rng.hpp"

#include <sstream>

#include "periogan/util/error.hpp"

namespace periogan {

std::string Rng::state_string() const {
  std::ostringstream os;
  os << state_[0] << ' ' << state_[1] << ' ' << state_[2] << ' ' << state_[3];
  return os.str();
}

Rng Rng::from_state_string(const std::string& text) {
  std::istringstream is(text);
  std::array<uint64_t, 4> s{};
  for (auto& word : s) {
    if (!(is >> word)) raise(ErrorKind::ChecksumError, "malformed rng state: " + text);
  }
  Rng rng;
  rng.set_state(s);
  return rng;
}

}  // namespace periogan
