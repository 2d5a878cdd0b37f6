#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nvc/errors.hpp"

namespace nvc {

// Byte-oriented range coder, 32-bit state, 16-bit symbol frequencies.
//
// The encoder keeps `low` in 64 bits so a carry out of the 32-bit window is
// detected on the fly and absorbed by the pending-byte run (the usual
// cache + 0xFF-run scheme). The decoder mirrors the encoder's range updates
// exactly, so both sides renormalize at the same points and the decoder
// consumes precisely the bytes the encoder wrote. Integer arithmetic only;
// streams are identical across platforms.
//
// Symbols are described by cumulative frequency tables with a fixed total of
// 2^16. Values outside a table's support are coded through its escape slot
// followed by the raw 32-bit value in two 16-bit halves.

inline constexpr int kCoderPrecisionBits = 16;
inline constexpr std::uint32_t kCoderTotal = 1u << kCoderPrecisionBits;
inline constexpr std::uint32_t kCoderTopBits = 24;  // renormalize below 2^24

/// Entropy-coded payload plus its exact bit count.
struct Bitstream {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bit_length = 0;  // 8 * bytes.size(); kept explicit for the container
};

/// Frequency table for one symbol slot assignment. Slots 0..support_size()-1
/// carry the integer values support_min..support_max; the final slot is the
/// escape. cum is strictly increasing, cum.front() == 0, cum.back() == 2^16.
struct CmfTable {
  std::int32_t support_min = 0;
  std::int32_t support_max = -1;
  std::vector<std::uint32_t> cum;

  std::int64_t support_size() const {
    return static_cast<std::int64_t>(support_max) - support_min + 1;
  }
  std::size_t escape_slot() const { return static_cast<std::size_t>(support_size()); }
  std::uint32_t freq(std::size_t slot) const { return cum[slot + 1] - cum[slot]; }

  bool valid() const {
    if (support_max < support_min) return false;
    if (cum.size() != static_cast<std::size_t>(support_size()) + 2) return false;
    if (cum.front() != 0 || cum.back() != kCoderTotal) return false;
    for (std::size_t i = 0; i + 1 < cum.size(); ++i)
      if (cum[i] >= cum[i + 1]) return false;  // every slot needs mass
    return true;
  }
};

class RangeEncoder {
 public:
  /// Codes the slot covering [cum_lo, cum_lo + freq) out of kCoderTotal.
  void encode(std::uint32_t cum_lo, std::uint32_t freq) {
    const std::uint32_t r = range_ >> kCoderPrecisionBits;
    low_ += static_cast<std::uint64_t>(r) * cum_lo;
    range_ = r * freq;
    while (range_ < (1u << kCoderTopBits)) {
      shift_low();
      range_ <<= 8;
    }
  }

  Bitstream finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    Bitstream s;
    s.bytes = std::move(out_);
    s.bit_length = 8 * static_cast<std::uint64_t>(s.bytes.size());
    return s;
  }

 private:
  void shift_low() {
    const std::uint32_t hi = static_cast<std::uint32_t>(low_ >> 32);
    if (hi != 0 || low_ < 0xFF000000ull) {
      out_.push_back(static_cast<std::uint8_t>(cache_ + hi));
      while (--pending_ > 0) out_.push_back(static_cast<std::uint8_t>(0xFF + hi));
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++pending_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint32_t pending_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
    code_ &= 0xFFFFFFFFull;  // first byte of a valid stream is always zero
  }

  /// Cumulative-frequency position of the pending symbol in [0, kCoderTotal).
  std::uint32_t decode_target() {
    r_ = range_ >> kCoderPrecisionBits;
    std::uint32_t t = static_cast<std::uint32_t>(code_ / r_);
    return t >= kCoderTotal ? kCoderTotal - 1 : t;
  }

  /// Commits the slot the caller resolved from decode_target().
  void consume(std::uint32_t cum_lo, std::uint32_t freq) {
    code_ -= static_cast<std::uint64_t>(r_) * cum_lo;
    range_ = r_ * freq;
    while (range_ < (1u << kCoderTopBits)) {
      code_ = ((code_ << 8) | next_byte()) & 0xFFFFFFFFull;
      range_ <<= 8;
    }
  }

 private:
  std::uint8_t next_byte() {
    if (pos_ >= bytes_.size())
      throw decode_error("range decoder: stream truncated at byte " + std::to_string(pos_) +
                         " of " + std::to_string(bytes_.size()));
    return bytes_[pos_++];
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t r_ = 0;
};

namespace detail {

inline void check_table(const CmfTable& t, std::size_t i) {
  if (!t.valid())
    throw decode_error("cmf table " + std::to_string(i) + " is malformed");
}

// Raw 32-bit value as two uniform 16-bit halves (exactly 32 bits each escape).
inline void encode_raw32(RangeEncoder& enc, std::uint32_t v) {
  enc.encode(v >> 16, 1);
  enc.encode(v & 0xFFFFu, 1);
}

inline std::uint32_t decode_raw32(RangeDecoder& dec) {
  std::uint32_t hi = dec.decode_target();
  dec.consume(hi, 1);
  std::uint32_t lo = dec.decode_target();
  dec.consume(lo, 1);
  return (hi << 16) | lo;
}

}  // namespace detail

/// Encodes symbols[i] under tables[table_of[i]]. `table_of` may be empty when
/// there is exactly one table. Values outside a table's support go through
/// its escape slot plus a raw 32-bit tail.
inline Bitstream encode_symbols(std::span<const std::int32_t> symbols,
                                std::span<const CmfTable> tables,
                                std::span<const std::uint32_t> table_of = {}) {
  if (tables.empty()) throw decode_error("encode_symbols: no tables");
  if (!table_of.empty() && table_of.size() != symbols.size())
    throw decode_error("encode_symbols: table assignment length " +
                       std::to_string(table_of.size()) + " != symbol count " +
                       std::to_string(symbols.size()));
  for (std::size_t i = 0; i < tables.size(); ++i) detail::check_table(tables[i], i);

  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CmfTable& t = tables[table_of.empty() ? 0 : table_of[i]];
    const std::int32_t v = symbols[i];
    if (v >= t.support_min && v <= t.support_max) {
      const std::size_t slot = static_cast<std::size_t>(v - t.support_min);
      enc.encode(t.cum[slot], t.freq(slot));
    } else {
      const std::size_t esc = t.escape_slot();
      enc.encode(t.cum[esc], t.freq(esc));
      detail::encode_raw32(enc, static_cast<std::uint32_t>(v));
    }
  }
  return enc.finish();
}

/// Exact inverse of encode_symbols for the identical table assignment and
/// count. Truncated or corrupt input raises decode_error.
inline std::vector<std::int32_t> decode_symbols(const Bitstream& stream,
                                                std::span<const CmfTable> tables,
                                                std::size_t count,
                                                std::span<const std::uint32_t> table_of = {}) {
  if (tables.empty()) throw decode_error("decode_symbols: no tables");
  if (!table_of.empty() && table_of.size() != count)
    throw decode_error("decode_symbols: table assignment length " +
                       std::to_string(table_of.size()) + " != symbol count " +
                       std::to_string(count));
  for (std::size_t i = 0; i < tables.size(); ++i) detail::check_table(tables[i], i);

  std::vector<std::int32_t> out;
  out.reserve(count);
  if (count == 0) return out;

  RangeDecoder dec(stream.bytes);
  for (std::size_t i = 0; i < count; ++i) {
    const CmfTable& t = tables[table_of.empty() ? 0 : table_of[i]];
    const std::uint32_t target = dec.decode_target();
    // Find the slot whose [cum[s], cum[s+1]) contains target.
    std::size_t lo = 0, hi = t.cum.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (t.cum[mid] <= target ? lo : hi) = mid;
    }
    dec.consume(t.cum[lo], t.freq(lo));
    if (lo == t.escape_slot())
      out.push_back(static_cast<std::int32_t>(detail::decode_raw32(dec)));
    else
      out.push_back(t.support_min + static_cast<std::int32_t>(lo));
  }
  return out;
}

/// Code length of `symbols` under the quantized table probabilities, in bits:
/// sum of -log2(freq/2^16), escapes costed as escape slot + 32 raw bits.
/// This is the yardstick the coder's efficiency contract is measured against.
inline double ideal_code_bits(std::span<const std::int32_t> symbols,
                              std::span<const CmfTable> tables,
                              std::span<const std::uint32_t> table_of = {}) {
  double bits = 0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CmfTable& t = tables[table_of.empty() ? 0 : table_of[i]];
    const std::int32_t v = symbols[i];
    std::size_t slot = (v >= t.support_min && v <= t.support_max)
                           ? static_cast<std::size_t>(v - t.support_min)
                           : t.escape_slot();
    bits -= std::log2(static_cast<double>(t.freq(slot)) / kCoderTotal);
    if (slot == t.escape_slot()) bits += 32;
  }
  return bits;
}

}  // namespace nvc
