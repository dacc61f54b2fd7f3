#include "fedpop/codec.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace fedpop {

void BitString::push(bool bit) {
  if (bits_ % 8 == 0) bytes_.push_back(0);
  if (bit) bytes_.back() |= static_cast<std::uint8_t>(1u << (7 - bits_ % 8));
  ++bits_;
}

void BitString::push_bits(std::uint64_t value, int count) {
  for (int i = count - 1; i >= 0; --i) push((value >> i) & 1u);
}

bool BitString::bit(std::size_t i) const {
  return (bytes_[i / 8] >> (7 - i % 8)) & 1u;
}

void BitString::set_from_bytes(const std::vector<std::uint8_t>& bytes,
                               std::size_t bits) {
  if (bits > bytes.size() * 8) throw decode_error("bit count exceeds byte buffer");
  bytes_ = bytes;
  bits_ = bits;
}

bool BitReader::read() {
  if (pos_ >= bits_->size()) throw decode_error("truncated bitstream");
  return bits_->bit(pos_++);
}

bool BitReader::peek() const {
  if (pos_ >= bits_->size()) throw decode_error("truncated bitstream");
  return bits_->bit(pos_);
}

std::uint64_t BitReader::read_bits(int count) {
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) v = (v << 1) | (read() ? 1u : 0u);
  return v;
}

void elias_encode(BitString& out, std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("Elias coding needs a positive integer");
  // Groups are prepended in the textual description; collecting them and
  // emitting in reverse does the same on an append-only string.
  std::uint64_t groups[8];
  int count = 0;
  while (k >= 2) {
    groups[count++] = k;
    k = static_cast<std::uint64_t>(std::bit_width(k)) - 1;  // floor(log2 k)
  }
  for (int i = count - 1; i >= 0; --i)
    out.push_bits(groups[i], std::bit_width(groups[i]));
  out.push(false);
}

EliasDecodeResult elias_decode(BitReader& in) {
  const std::size_t start = in.position();
  std::uint64_t value = 1;
  while (in.peek()) {
    if (value >= 64) throw decode_error("Elias group too long");
    value = in.read_bits(static_cast<int>(value) + 1);
  }
  in.read();  // terminating 0
  return {value, in.position() - start};
}

std::size_t elias_length(std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("Elias coding needs a positive integer");
  std::size_t len = 1;
  while (k >= 2) {
    len += static_cast<std::size_t>(std::bit_width(k));
    k = static_cast<std::uint64_t>(std::bit_width(k)) - 1;
  }
  return len;
}

double elias_length_bound(std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("Elias coding needs a positive integer");
  double bound = 1.0;
  double t = static_cast<double>(k);
  while (t >= 2.0) {
    bound += std::log2(t) + 1.0;
    t = std::log2(t);
  }
  return bound;
}

EncodedGradient encode_gradient(const QuantizedGradient& q) {
  EncodedGradient e;
  e.level_count = q.level_count;
  e.dim = static_cast<std::uint32_t>(q.dim());
  e.norm = q.norm;

  std::uint64_t prev = 0;  // 1-based position of the previous nonzero
  for (std::size_t i = 0; i < q.dim(); ++i) {
    if (q.levels[i] == 0) continue;
    const std::uint64_t pos = i + 1;
    elias_encode(e.payload, pos - prev);
    e.payload.push(q.signs[i] > 0);
    elias_encode(e.payload, q.levels[i]);
    prev = pos;
  }
  // Terminator: a gap placing the cursor one past the dimension.
  elias_encode(e.payload, q.dim() + 1 - prev);
  e.total_bits = 64 + e.payload.size();
  return e;
}

QuantizedGradient decode_gradient(const EncodedGradient& e) {
  QuantizedGradient q;
  q.norm = e.norm;
  q.level_count = e.level_count;
  q.signs.assign(e.dim, 1);
  q.levels.assign(e.dim, 0);

  BitReader in(e.payload);
  std::uint64_t pos = 0;
  while (true) {
    pos += elias_decode(in).value;
    if (pos == e.dim + 1) break;
    if (pos > e.dim + 1) throw decode_error("coordinate position overflows dimension");
    const bool positive = in.read();
    const std::uint64_t level = elias_decode(in).value;
    if (level > e.level_count) throw decode_error("level exceeds quantizer range");
    q.levels[pos - 1] = static_cast<std::uint32_t>(level);
    q.signs[pos - 1] = positive ? 1 : -1;
  }
  return q;
}

std::vector<std::uint8_t> serialize(const EncodedGradient& e) {
  if (e.level_count > 0xffff)
    throw std::invalid_argument("wire format carries a 16-bit level field");
  std::vector<std::uint8_t> out;
  out.push_back(e.version);
  out.push_back(static_cast<std::uint8_t>(e.level_count >> 8));
  out.push_back(static_cast<std::uint8_t>(e.level_count & 0xff));
  for (int i = 3; i >= 0; --i)
    out.push_back(static_cast<std::uint8_t>((e.dim >> (8 * i)) & 0xff));
  std::uint64_t norm_bits = 0;
  static_assert(sizeof(norm_bits) == sizeof(e.norm));
  std::memcpy(&norm_bits, &e.norm, sizeof(norm_bits));
  for (int i = 7; i >= 0; --i)
    out.push_back(static_cast<std::uint8_t>((norm_bits >> (8 * i)) & 0xff));
  // Payload bit count so the zero padding is distinguishable.
  const std::uint64_t nbits = e.payload.size();
  for (int i = 7; i >= 0; --i)
    out.push_back(static_cast<std::uint8_t>((nbits >> (8 * i)) & 0xff));
  out.insert(out.end(), e.payload.bytes().begin(), e.payload.bytes().end());
  return out;
}

EncodedGradient deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 23) throw decode_error("gradient envelope too short");
  EncodedGradient e;
  std::size_t at = 0;
  e.version = bytes[at++];
  if (e.version != 1) throw decode_error("unsupported gradient envelope version");
  e.level_count = (static_cast<std::uint32_t>(bytes[at]) << 8) | bytes[at + 1];
  at += 2;
  e.dim = 0;
  for (int i = 0; i < 4; ++i) e.dim = (e.dim << 8) | bytes[at++];
  std::uint64_t norm_bits = 0;
  for (int i = 0; i < 8; ++i) norm_bits = (norm_bits << 8) | bytes[at++];
  std::memcpy(&e.norm, &norm_bits, sizeof(e.norm));
  std::uint64_t nbits = 0;
  for (int i = 0; i < 8; ++i) nbits = (nbits << 8) | bytes[at++];
  const std::size_t payload_bytes = bytes.size() - at;
  if (nbits > payload_bytes * 8) throw decode_error("payload shorter than declared");
  e.payload.set_from_bytes(
      std::vector<std::uint8_t>(bytes.begin() + static_cast<long>(at), bytes.end()),
      nbits);
  e.total_bits = 64 + nbits;
  return e;
}

double calibrate_elias_constant(std::uint64_t max_integer) {
  double c = 1.0;
  for (std::uint64_t k = 2; k <= max_integer; ++k) {
    const double ratio =
        (static_cast<double>(elias_length(k)) - 1.0) / std::log2(static_cast<double>(k));
    if (ratio > c) c = ratio;
  }
  return c;
}

std::optional<double> bit_budget_bound(std::uint32_t d, std::uint32_t s,
                                       double calibrated_constant) {
  const double dd = d;
  const double ss = s;
  const double sparsity = ss * ss + std::sqrt(dd);
  if (sparsity > dd / 2.0) return std::nullopt;  // theorem hypothesis fails
  const double log_term = std::log2(2.0 * (ss * ss + dd) / sparsity);
  return 64.0 + (3.0 + 1.5 * calibrated_constant * log_term) * sparsity;
}

}  // namespace fedpop
