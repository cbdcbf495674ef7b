#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace adff {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> samples;  // interleaved, normalized to [-1, 1]
};

namespace detail {

inline uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace detail

// Reads a PCM WAV file: 16/24-bit integer or 32-bit float, any channel count.
inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open audio file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  WavData wav;
  uint16_t format = 0;
  int bits = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    uint32_t chunk_len = detail::read_u32(hdr + 4);
    size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16 || body + chunk_len > bytes.size())
        throw std::runtime_error("malformed fmt chunk: " + path);
      const unsigned char* p = bytes.data() + body;
      format = detail::read_u16(p);
      wav.channels = detail::read_u16(p + 2);
      wav.sample_rate = static_cast<int>(detail::read_u32(p + 4));
      bits = detail::read_u16(p + 14);
      if (format == 0xFFFE && chunk_len >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the first two bytes of the SubFormat GUID
        // hold the actual format tag.
        format = detail::read_u16(p + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = std::min<size_t>(chunk_len, bytes.size() - body);
      break;
    }
    pos = body + chunk_len + (chunk_len & 1);
  }
  if (wav.channels <= 0 || wav.sample_rate <= 0)
    throw std::runtime_error("missing fmt chunk: " + path);
  if (data_off == 0 || data_len == 0) throw std::runtime_error("zero-length audio: " + path);

  const unsigned char* d = bytes.data() + data_off;
  if (format == 1 && bits == 16) {
    size_t n = data_len / 2;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = static_cast<int16_t>(d[2 * i] | (d[2 * i + 1] << 8));
      wav.samples[i] = v / 32768.0;
    }
  } else if (format == 1 && bits == 24) {
    size_t n = data_len / 3;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int32_t v = static_cast<int32_t>(d[3 * i] | (d[3 * i + 1] << 8) | (d[3 * i + 2] << 16));
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign extend
      wav.samples[i] = v / 8388608.0;
    }
  } else if (format == 3 && bits == 32) {
    size_t n = data_len / 4;
    wav.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = detail::read_u32(d + 4 * i);
      float v;
      std::memcpy(&v, &u, 4);
      wav.samples[i] = static_cast<double>(v);
    }
  } else {
    throw std::runtime_error("unsupported WAV encoding (format=" + std::to_string(format) +
                             ", bits=" + std::to_string(bits) + "): " + path);
  }
  if (wav.samples.empty()) throw std::runtime_error("zero-length audio: " + path);
  return wav;
}

// Writes mono 32-bit float WAV.
inline void write_wav_f32(const std::string& path, const std::vector<double>& samples,
                          int sample_rate) {
  std::string out;
  uint32_t data_len = static_cast<uint32_t>(samples.size() * 4);
  out += "RIFF";
  detail::put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 3);  // IEEE float
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<uint32_t>(sample_rate) * 4);
  detail::put_u16(out, 4);
  detail::put_u16(out, 32);
  out += "data";
  detail::put_u32(out, data_len);
  for (double s : samples) {
    float v = static_cast<float>(s);
    uint32_t u;
    std::memcpy(&u, &v, 4);
    detail::put_u32(out, u);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

// Writes mono 16-bit PCM WAV.
inline void write_wav_i16(const std::string& path, const std::vector<double>& samples,
                          int sample_rate) {
  std::string out;
  uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  out += "RIFF";
  detail::put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<uint32_t>(sample_rate) * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out += "data";
  detail::put_u32(out, data_len);
  for (double s : samples) {
    double c = std::max(-1.0, std::min(1.0, s));
    int16_t v = static_cast<int16_t>(std::lrint(c * 32767.0));
    detail::put_u16(out, static_cast<uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace adff
