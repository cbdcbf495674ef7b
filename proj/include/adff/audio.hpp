#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/wav.hpp"

namespace adff {

constexpr int kSampleRate = 44100;

struct AudioClip {
  std::vector<double> samples;  // mono
  int sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

// Windowed-sinc sample rate conversion. Cutoff sits just below the Nyquist
// frequency of the slower rate.
inline std::vector<double> resample(const std::vector<double>& in, int src_rate, int dst_rate) {
  if (src_rate == dst_rate) return in;
  if (src_rate <= 0 || dst_rate <= 0) throw std::invalid_argument("bad sample rate");
  const int64_t n_in = static_cast<int64_t>(in.size());
  const int64_t n_out = llround(static_cast<double>(n_in) * dst_rate / src_rate);
  const int taps = 32;  // kernel half-width in source samples
  const double fc = 0.475 * std::min(1.0, static_cast<double>(dst_rate) / src_rate);
  std::vector<double> out(static_cast<size_t>(n_out));
  for (int64_t n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) * src_rate / dst_rate;
    const int64_t m0 = static_cast<int64_t>(std::ceil(t - taps));
    const int64_t m1 = static_cast<int64_t>(std::floor(t + taps));
    double acc = 0.0, wsum = 0.0;
    for (int64_t m = m0; m <= m1; ++m) {
      const double u = t - static_cast<double>(m);
      double k;
      if (std::abs(u) < 1e-12) {
        k = 2.0 * fc;
      } else {
        k = std::sin(2.0 * M_PI * fc * u) / (M_PI * u);
      }
      k *= 0.5 * (1.0 + std::cos(M_PI * u / taps));  // Hann taper
      wsum += k;
      if (m >= 0 && m < n_in) acc += k * in[static_cast<size_t>(m)];
    }
    out[static_cast<size_t>(n)] = (wsum != 0.0) ? acc / wsum : 0.0;
  }
  return out;
}

// Decodes a WAV file to a mono clip at 44.1 kHz. Multichannel input is
// averaged; other source rates are resampled.
inline AudioClip load_audio(const std::string& path) {
  WavData wav = read_wav(path);
  const size_t frames = wav.samples.size() / static_cast<size_t>(wav.channels);
  if (frames == 0) throw std::runtime_error("zero-length audio: " + path);
  std::vector<double> mono(frames);
  if (wav.channels == 1) {
    mono = std::move(wav.samples);
  } else {
    for (size_t i = 0; i < frames; ++i) {
      double s = 0.0;
      for (int c = 0; c < wav.channels; ++c)
        s += wav.samples[i * static_cast<size_t>(wav.channels) + static_cast<size_t>(c)];
      mono[i] = s / wav.channels;
    }
  }
  if (wav.sample_rate != kSampleRate) mono = resample(mono, wav.sample_rate, kSampleRate);
  for (double s : mono)
    if (!std::isfinite(s)) throw std::runtime_error("non-finite sample in " + path);
  return AudioClip{std::move(mono), kSampleRate};
}

// Appends zeros until the clip reaches target_seconds. Longer clips are
// returned unchanged; padding never truncates.
inline AudioClip pad_to_length(AudioClip clip, double target_seconds) {
  if (target_seconds <= 0.0) throw std::invalid_argument("target_seconds must be positive");
  const size_t target = static_cast<size_t>(llround(target_seconds * clip.sample_rate));
  if (clip.samples.size() < target) clip.samples.resize(target, 0.0);
  return clip;
}

}  // namespace adff
