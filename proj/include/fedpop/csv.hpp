#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace fedpop {

// Shortest round-trippable decimal form. Used for every floating-point
// value written to an artifact so reruns are byte-comparable.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

// FNV-1a over a canonical string; used to stamp artifacts with the
// configuration that produced them.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fedpop
