#pragma once
// Minimal RIFF/WAVE reader used to check encoder output. Walks the chunk
// list instead of assuming a fixed header layout.

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

struct WavData {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint32_t byte_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
  std::uint32_t data_bytes = 0;
  std::vector<std::int16_t> samples;
};

inline std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }

inline WavData read_wav(const std::vector<std::uint8_t>& b) {
  auto fail = [](const std::string& why) { throw std::runtime_error("wav: " + why); };
  if (b.size() < 12) fail("short file");
  if (std::memcmp(b.data(), "RIFF", 4) != 0) fail("missing RIFF");
  if (std::memcmp(b.data() + 8, "WAVE", 4) != 0) fail("missing WAVE");
  if (le32(b.data() + 4) != b.size() - 8) fail("RIFF size mismatch");

  WavData w;
  bool have_fmt = false, have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint8_t* h = b.data() + pos;
    const std::uint32_t size = le32(h + 4);
    if (pos + 8 + size > b.size()) fail("chunk overruns file");
    const std::uint8_t* body = h + 8;
    if (std::memcmp(h, "fmt ", 4) == 0) {
      if (size < 16) fail("fmt too small");
      w.format = le16(body);
      w.channels = le16(body + 2);
      w.sample_rate = le32(body + 4);
      w.byte_rate = le32(body + 8);
      w.block_align = le16(body + 12);
      w.bits = le16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(h, "data", 4) == 0) {
      if (!have_fmt) fail("data before fmt");
      w.data_bytes = size;
      if (w.bits != 16) fail("only 16-bit supported");
      if (size % 2) fail("odd data size");
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(le16(body + 2 * i));
      have_data = true;
    }
    pos += 8 + size + (size & 1);
  }
  if (!have_fmt || !have_data) fail("missing fmt or data");
  if (w.format != 1) fail("not PCM");
  if (w.block_align != w.channels * w.bits / 8) fail("block_align");
  if (w.byte_rate != w.sample_rate * w.block_align) fail("byte_rate");
  return w;
}

}  // namespace oracle
