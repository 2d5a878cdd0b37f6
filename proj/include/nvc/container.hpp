#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "nvc/bytes.hpp"
#include "nvc/range_coder.hpp"

namespace nvc {

// Compressed-image container, little-endian fixed layout:
//
//   offset size  field
//   0      4     magic "NVC1"
//   4      2     version (u16) = 1
//   6      32    model_id: digest of the checkpoint that encoded this file
//   38     4     width  (u32, true pre-padding extent)
//   42     4     height (u32, true pre-padding extent)
//   46     1     channels (u8)
//   47     2     latent_channels (u16)
//   49     8     payload_bit_length (u64)
//   57     ...   payload (range-coder bytes, ceil(bit_length / 8))
//
// Decoding requires the checkpoint whose digest equals model_id; anything
// else is refused before a single payload byte is touched.

inline constexpr char kContainerMagic[4] = {'N', 'V', 'C', '1'};
inline constexpr std::uint16_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 57;

struct CodedImage {
  std::uint16_t version = kContainerVersion;
  Digest model_id{};
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t channels = 3;
  std::uint16_t latent_channels = 0;
  Bitstream payload;

  std::uint64_t total_bits() const {
    return 8 * kContainerHeaderBytes + payload.bit_length;
  }
};

inline std::vector<std::uint8_t> serialize_container(const CodedImage& c) {
  ByteWriter w;
  w.bytes(kContainerMagic, 4);
  w.u16(c.version);
  w.bytes(c.model_id.data(), c.model_id.size());
  w.u32(c.width);
  w.u32(c.height);
  w.u8(c.channels);
  w.u16(c.latent_channels);
  w.u64(c.payload.bit_length);
  w.bytes(c.payload.bytes.data(), c.payload.bytes.size());
  return w.take();
}

inline CodedImage parse_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kContainerHeaderBytes || std::memcmp(bytes.data(), kContainerMagic, 4) != 0)
    throw format_error("not a coded-image file (bad magic)");
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  CodedImage c;
  c.version = r.u16();
  if (c.version != kContainerVersion)
    throw format_error("unsupported container version " + std::to_string(c.version));
  r.bytes(c.model_id.data(), c.model_id.size());
  c.width = r.u32();
  c.height = r.u32();
  c.channels = r.u8();
  c.latent_channels = r.u16();
  c.payload.bit_length = r.u64();
  const std::uint64_t payload_bytes = (c.payload.bit_length + 7) / 8;
  if (r.remaining() != payload_bytes)
    throw format_error("container payload truncated: header declares " +
                       std::to_string(c.payload.bit_length) + " bits (" +
                       std::to_string(payload_bytes) + " bytes) but " +
                       std::to_string(r.remaining()) + " bytes are present");
  c.payload.bytes.resize(static_cast<std::size_t>(payload_bytes));
  if (payload_bytes > 0) r.bytes(c.payload.bytes.data(), c.payload.bytes.size());
  if (c.width == 0 || c.height == 0) throw format_error("container has zero extents");
  return c;
}

}  // namespace nvc
