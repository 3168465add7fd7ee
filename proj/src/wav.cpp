#include "aegan/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aegan/errors.hpp"

namespace aegan {

namespace {

uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}

uint16_t read_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file: " + path);

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t len = read_u32(bytes.data() + pos + 4);
    const size_t body = pos + 8;
    if (body + len > bytes.size()) throw IoError("truncated wav chunk: " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw IoError("malformed fmt chunk: " + path);
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!data || rate == 0) throw IoError("missing fmt/data chunk: " + path);
  if (channels != 1)
    throw InvalidInput("expected single-channel audio, got " +
                       std::to_string(channels) + " channels: " + path);

  Waveform w;
  w.sample_rate_hz = static_cast<int>(rate);
  if (format == 1 && bits == 16) {
    const size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v;
      std::memcpy(&v, data + 2 * i, 2);
      w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 1 && bits == 24) {
    const size_t n = data_len / 3;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int32_t v = int32_t(data[3 * i]) | int32_t(data[3 * i + 1]) << 8 |
                  int32_t(int8_t(data[3 * i + 2])) << 16;
      w.samples[i] = static_cast<float>(v) / 8388608.0f;
    }
  } else if (format == 1 && bits == 32) {
    const size_t n = data_len / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int32_t v;
      std::memcpy(&v, data + 4 * i, 4);
      w.samples[i] = static_cast<float>(v / 2147483648.0);
    }
  } else if (format == 3 && bits == 32) {
    const size_t n = data_len / 4;
    w.samples.resize(n);
    std::memcpy(w.samples.data(), data, n * 4);
  } else {
    throw IoError("unsupported wav encoding (format " + std::to_string(format) +
                  ", " + std::to_string(bits) + " bit): " + path);
  }

  if (w.samples.empty()) throw InvalidInput("zero-length audio: " + path);
  for (float v : w.samples)
    if (!std::isfinite(v)) throw InvalidInput("non-finite sample in " + path);
  return w;
}

void write_wav16(const std::string& path, const std::vector<float>& samples,
                 int sample_rate_hz) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav file: " + path);

  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  const uint32_t riff_len = 36 + data_len;
  const uint32_t byte_rate = static_cast<uint32_t>(sample_rate_hz) * 2;

  auto put_u32 = [&](uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    out.write(b, 4);
  };
  auto put_u16 = [&](uint16_t v) {
    char b[2] = {char(v), char(v >> 8)};
    out.write(b, 2);
  };

  out.write("RIFF", 4);
  put_u32(riff_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(static_cast<uint32_t>(sample_rate_hz));
  put_u32(byte_rate);
  put_u16(2);   // block align
  put_u16(16);  // bits
  out.write("data", 4);
  put_u32(data_len);
  for (float v : samples) {
    const float c = std::clamp(v, -1.0f, 1.0f);
    const int32_t q = static_cast<int32_t>(std::lrint(c * 32767.0f));
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace aegan
