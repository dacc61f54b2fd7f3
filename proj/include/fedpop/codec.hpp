#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedpop/quantizer.hpp"

namespace fedpop {

class decode_error : public std::runtime_error {
 public:
  explicit decode_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Append-only bit sequence, MSB-first within each byte.
class BitString {
 public:
  void push(bool bit);
  void push_bits(std::uint64_t value, int count);  // most significant first
  std::size_t size() const { return bits_; }
  bool bit(std::size_t i) const;
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void set_from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t bits);

  bool operator==(const BitString& other) const = default;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

// Single-consumer cursor over a BitString.
class BitReader {
 public:
  explicit BitReader(const BitString& bits) : bits_(&bits) {}
  bool read();
  bool peek() const;
  std::uint64_t read_bits(int count);
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bits_->size() - pos_; }

 private:
  const BitString* bits_;
  std::size_t pos_ = 0;
};

// --- recursive prefix code for positive integers ----------------------
//
// Encoding of k: start from the terminating "0"; while floor(log2 k) > 0
// prepend the binary form of k and continue with k <- floor(log2 k).
// Examples: 1 -> "0", 2 -> "100", 8 -> "1110000".

void elias_encode(BitString& out, std::uint64_t k);

struct EliasDecodeResult {
  std::uint64_t value = 0;
  std::size_t bits_consumed = 0;
};
EliasDecodeResult elias_decode(BitReader& in);

// Exact codeword length, via the length recursion (no bits materialized).
std::size_t elias_length(std::uint64_t k);

// Iterated-logarithm upper bound on the codeword length:
//   sum over levels t = k, log2 t, log2 log2 t, ... (while t >= 2)
//   of (log2 t + 1), plus the final terminator bit.
// Dominates elias_length(k) for every k >= 1.
double elias_length_bound(std::uint64_t k);

// --- gradient tuple wire format ---------------------------------------
//
// payload := for each nonzero coordinate in order:
//              Elias(gap to it)   (first gap = 1-based position)
//              1 sign bit         (1 => +1, 0 => -1)
//              Elias(level)
//            then a terminating gap pointing one past the dimension.
// total_bits = 64 (norm) + |payload|; the serialized envelope prepends
// [8-bit version][16-bit s][32-bit d] and pads the payload to a byte.

struct EncodedGradient {
  std::uint8_t version = 1;
  std::uint32_t level_count = 1;  // s
  std::uint32_t dim = 0;          // d
  double norm = 0.0;
  BitString payload;
  std::uint64_t total_bits = 0;
};

EncodedGradient encode_gradient(const QuantizedGradient& q);
QuantizedGradient decode_gradient(const EncodedGradient& e);

// Byte-exact envelope for files and simulated messages. Serialization
// requires s < 2^16 (the field width fixed by the format); the in-memory
// tuple form has no such limit.
std::vector<std::uint8_t> serialize(const EncodedGradient& e);
EncodedGradient deserialize(const std::vector<std::uint8_t>& bytes);

// Theorem-style transmission bound with an explicit stand-in constant C
// for the (1+O(1)) factor; calibrated from the exact length recursion so
// the bound dominates the measured encoder. Returns nothing when the
// hypothesis s^2 + sqrt(d) <= d/2 fails.
double calibrate_elias_constant(std::uint64_t max_integer);
std::optional<double> bit_budget_bound(std::uint32_t d, std::uint32_t s,
                                       double calibrated_constant);

}  // namespace fedpop
