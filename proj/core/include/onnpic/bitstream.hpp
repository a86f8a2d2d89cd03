#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "onnpic/errors.hpp"

namespace onnpic {

// ONNP container, little-endian throughout:
//   magic "ONNP" | u8 version | u8 q_index | u16 height | u16 width |
//   u8 pad_right | u8 pad_bottom | u32 z_len | z bytes | u32 y_len |
//   y bytes | u32 crc32 (IEEE, over all prior bytes)
// height/width are the original image dims; pads record the reflective
// padding applied to reach multiples of 16.
inline constexpr uint8_t kBitstreamVersion = 1;

struct BitstreamHeader {
  uint8_t version = kBitstreamVersion;
  uint8_t q_index = 0;
  uint16_t height = 0;
  uint16_t width = 0;
  uint8_t pad_right = 0;
  uint8_t pad_bottom = 0;
};

struct Container {
  BitstreamHeader header;
  std::vector<uint8_t> z_stream;
  std::vector<uint8_t> y_stream;
};

uint32_t crc32_ieee(std::span<const uint8_t> bytes);

std::vector<uint8_t> write_container(const Container& c);
// Validates magic, version and checksum; throws DecodeError on any mismatch
// or truncation.
Container read_container(std::span<const uint8_t> bytes);

}  // namespace onnpic
