#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "adff/frontend.hpp"
#include "adff/rng.hpp"

namespace adff {

// Feature cache layout: <dir>/<id>.f32 holds the (T x 128) matrix as raw
// little-endian float32, row-major (time-major); <dir>/<id>.meta is a text
// sidecar. Entries are keyed by (audio content hash, frontend version).

inline uint64_t hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size());
}

struct CacheMeta {
  int frames = 0;
  int bands = kMelBands;
  int sample_rate = kSampleRate;
  double hop_seconds = kHopSeconds;
  double window_seconds = kWindowSeconds;
  std::string source;
  int frontend_version = kFrontendVersion;
  uint64_t audio_hash = 0;
};

inline std::string cache_feature_path(const std::string& dir, const std::string& id) {
  return (std::filesystem::path(dir) / (id + ".f32")).string();
}

inline std::string cache_meta_path(const std::string& dir, const std::string& id) {
  return (std::filesystem::path(dir) / (id + ".meta")).string();
}

inline void write_feature_cache(const std::string& dir, const std::string& id,
                                const MelSpectrogram& spec, const std::string& source,
                                uint64_t audio_hash) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(cache_feature_path(dir, id), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write feature cache for " + id);
    for (int64_t i = 0; i < spec.data.size(); ++i) {
      float v = static_cast<float>(spec.data[i]);
      uint32_t u;
      std::memcpy(&u, &v, 4);
      char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                   static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
      f.write(b, 4);
    }
  }
  std::ostringstream meta;
  meta << "frames = " << spec.frames() << "\n";
  meta << "bands = " << kMelBands << "\n";
  meta << "sample_rate = " << spec.sample_rate << "\n";
  meta << "hop_seconds = " << spec.hop_seconds << "\n";
  meta << "window_seconds = " << spec.window_seconds << "\n";
  meta << "source = " << source << "\n";
  meta << "frontend_version = " << kFrontendVersion << "\n";
  meta << "audio_hash = " << audio_hash << "\n";
  std::ofstream f(cache_meta_path(dir, id));
  if (!f) throw std::runtime_error("cannot write cache sidecar for " + id);
  f << meta.str();
}

inline bool read_cache_meta(const std::string& dir, const std::string& id, CacheMeta* out) {
  std::ifstream f(cache_meta_path(dir, id));
  if (!f) return false;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t");
      size_t b = s.find_last_not_of(" \t\r");
      return (a == std::string::npos) ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  try {
    out->frames = std::stoi(kv.at("frames"));
    out->bands = std::stoi(kv.at("bands"));
    out->sample_rate = std::stoi(kv.at("sample_rate"));
    out->hop_seconds = std::stod(kv.at("hop_seconds"));
    out->window_seconds = std::stod(kv.at("window_seconds"));
    out->source = kv.at("source");
    out->frontend_version = std::stoi(kv.at("frontend_version"));
    out->audio_hash = std::stoull(kv.at("audio_hash"));
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

// True when a cache entry exists for this id and matches the audio hash and
// the current frontend version.
inline bool cache_fresh(const std::string& dir, const std::string& id, uint64_t audio_hash) {
  CacheMeta meta;
  if (!read_cache_meta(dir, id, &meta)) return false;
  return meta.audio_hash == audio_hash && meta.frontend_version == kFrontendVersion &&
         std::filesystem::exists(cache_feature_path(dir, id));
}

inline MelSpectrogram read_feature_cache(const std::string& dir, const std::string& id) {
  CacheMeta meta;
  if (!read_cache_meta(dir, id, &meta))
    throw std::runtime_error("missing or malformed cache sidecar for " + id);
  std::ifstream f(cache_feature_path(dir, id), std::ios::binary);
  if (!f) throw std::runtime_error("missing cache data for " + id);
  MelSpectrogram spec;
  spec.data = Tensor({meta.frames, meta.bands});
  spec.sample_rate = meta.sample_rate;
  spec.hop_seconds = meta.hop_seconds;
  spec.window_seconds = meta.window_seconds;
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() != static_cast<size_t>(spec.data.size()) * 4)
    throw std::runtime_error("cache data size mismatch for " + id);
  for (int64_t i = 0; i < spec.data.size(); ++i) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + i * 4;
    uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                 (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &u, 4);
    spec.data[i] = static_cast<double>(v);
  }
  return spec;
}

}  // namespace adff
