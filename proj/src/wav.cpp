#include "roomeq/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace roomeq {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
void wr_u16(std::ostream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("read_wav: not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t chunk_len = rd_u32(bytes.data() + pos + 4);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw std::runtime_error("read_wav: short fmt chunk: " + path);
      format = rd_u16(bytes.data() + pos + 8);
      channels = rd_u16(bytes.data() + pos + 10);
      rate = rd_u32(bytes.data() + pos + 12);
      bits = rd_u16(bytes.data() + pos + 22);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (data_off == 0 || data_off + data_len > bytes.size())
    throw std::runtime_error("read_wav: missing or truncated data chunk: " + path);
  if (channels != 1)
    throw std::runtime_error("read_wav: only mono files are supported: " + path);

  WavData out;
  out.fs = rate;
  if (format == 3 && bits == 32) {
    const size_t n = data_len / 4;
    out.samples.resize(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, bytes.data() + data_off + 4 * i, 4);
      out.samples[static_cast<Eigen::Index>(i)] = v;
    }
  } else if (format == 1 && bits == 16) {
    const size_t n = data_len / 2;
    out.samples.resize(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) {
      int16_t v;
      std::memcpy(&v, bytes.data() + data_off + 2 * i, 2);
      out.samples[static_cast<Eigen::Index>(i)] = v / 32768.0;
    }
  } else {
    throw std::runtime_error("read_wav: unsupported sample format: " + path);
  }
  if (out.samples.size() == 0)
    throw std::runtime_error("read_wav: zero-length data chunk: " + path);
  return out;
}

void write_wav(const std::string& path, const Vec& samples, double fs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);
  const uint32_t n = static_cast<uint32_t>(samples.size());
  const uint32_t data_len = 4 * n;
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 3);  // IEEE float
  wr_u16(f, 1);
  wr_u32(f, static_cast<uint32_t>(fs));
  wr_u32(f, static_cast<uint32_t>(fs) * 4);
  wr_u16(f, 4);
  wr_u16(f, 32);
  f.write("data", 4);
  wr_u32(f, data_len);
  for (uint32_t i = 0; i < n; ++i) {
    const float v = static_cast<float>(samples[static_cast<Eigen::Index>(i)]);
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!f) throw std::runtime_error("write_wav: write failed: " + path);
}

}  // namespace roomeq
