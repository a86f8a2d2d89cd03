#include "onnpic/bitstream.hpp"

#include <array>
#include <cstring>
#include <string>

namespace onnpic {

namespace {

constexpr char kMagic[4] = {'O', 'N', 'N', 'P'};

std::array<uint32_t, 256> make_crc_table() {
  std::array<uint32_t, 256> t{};
  for (uint32_t i = 0; i < 256; ++i) {
    uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    }
    t[i] = c;
  }
  return t;
}

void put_u16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(static_cast<uint8_t>(v & 0xFF));
  out->push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

struct Reader {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;

  void need(size_t k, const char* what) {
    if (pos + k > n) {
      throw DecodeError(std::string("truncated bitstream reading ") + what +
                        " at byte " + std::to_string(pos));
    }
  }
  uint8_t u8(const char* what) {
    need(1, what);
    return p[pos++];
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(p[pos]) |
                 static_cast<uint16_t>(p[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::vector<uint8_t> bytes(size_t k, const char* what) {
    need(k, what);
    std::vector<uint8_t> v(p + pos, p + pos + k);
    pos += k;
    return v;
  }
};

}  // namespace

uint32_t crc32_ieee(std::span<const uint8_t> bytes) {
  static const std::array<uint32_t, 256> table = make_crc_table();
  uint32_t c = 0xFFFFFFFFu;
  for (uint8_t b : bytes) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> write_container(const Container& c) {
  std::vector<uint8_t> out;
  out.reserve(24 + c.z_stream.size() + c.y_stream.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(c.header.version);
  out.push_back(c.header.q_index);
  put_u16(&out, c.header.height);
  put_u16(&out, c.header.width);
  out.push_back(c.header.pad_right);
  out.push_back(c.header.pad_bottom);
  put_u32(&out, static_cast<uint32_t>(c.z_stream.size()));
  out.insert(out.end(), c.z_stream.begin(), c.z_stream.end());
  put_u32(&out, static_cast<uint32_t>(c.y_stream.size()));
  out.insert(out.end(), c.y_stream.begin(), c.y_stream.end());
  put_u32(&out, crc32_ieee(out));
  return out;
}

Container read_container(std::span<const uint8_t> bytes) {
  Reader r{bytes.data(), bytes.size()};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DecodeError("not an ONNP bitstream (bad magic)");
  }
  r.pos = 4;
  Container c;
  c.header.version = r.u8("version");
  if (c.header.version != kBitstreamVersion) {
    throw DecodeError("unsupported bitstream version " +
                      std::to_string(c.header.version));
  }
  c.header.q_index = r.u8("q_index");
  c.header.height = r.u16("height");
  c.header.width = r.u16("width");
  c.header.pad_right = r.u8("pad_right");
  c.header.pad_bottom = r.u8("pad_bottom");
  uint32_t zlen = r.u32("z_len");
  c.z_stream = r.bytes(zlen, "z stream");
  uint32_t ylen = r.u32("y_len");
  c.y_stream = r.bytes(ylen, "y stream");
  size_t body = r.pos;
  uint32_t stored = r.u32("checksum");
  uint32_t actual = crc32_ieee(bytes.subspan(0, body));
  if (stored != actual) {
    throw DecodeError("bitstream checksum mismatch (corrupt file or wrong "
                      "tables)");
  }
  return c;
}

}  // namespace onnpic
