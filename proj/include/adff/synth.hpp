#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adff/dataset.hpp"
#include "adff/frontend.hpp"
#include "adff/rng.hpp"
#include "adff/wav.hpp"

namespace adff {

// Desk-scale synthetic corpus: deterministic tone-stack clips whose labels
// are analytic functions of the signal. Arousal tracks normalized RMS energy,
// valence tracks the normalized log spectral centroid, so both targets are
// recoverable from the audio alone.

constexpr double kSynthRmsNorm = 0.5;
constexpr double kSynthCentroidLoHz = 100.0;
constexpr double kSynthCentroidHiHz = 10000.0;

inline double measure_rms(const std::vector<double>& samples) {
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

// Energy-weighted mean frequency of the whole signal (one big transform).
inline double measure_centroid(const std::vector<double>& samples, int sample_rate) {
  const int n = static_cast<int>(samples.size());
  detail::RealFft fft(n);
  std::vector<double> power(static_cast<size_t>(n / 2 + 1));
  fft.power(samples.data(), power.data());
  double num = 0.0, den = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * sample_rate / n;
    num += f * power[static_cast<size_t>(k)];
    den += power[static_cast<size_t>(k)];
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

inline double arousal_from_rms(double rms) {
  return std::clamp(rms / kSynthRmsNorm, 0.0, 1.0);
}

inline double valence_from_centroid(double centroid_hz) {
  const double lo = std::log(kSynthCentroidLoHz);
  const double hi = std::log(kSynthCentroidHiHz);
  if (centroid_hz <= 0.0) return 0.0;
  return std::clamp((std::log(centroid_hz) - lo) / (hi - lo), 0.0, 1.0);
}

// Three energy-normalized harmonics plus a faint noise floor; amplitude and
// fundamental drawn from the clip's own rng stream.
inline std::vector<double> synth_clip(Rng& rng, double duration_s, int sample_rate,
                                      double* amplitude_out = nullptr,
                                      double* fundamental_out = nullptr) {
  const double amp = rng.uniform(0.08, 0.65);
  const double f0 = std::exp(rng.uniform(std::log(180.0), std::log(3500.0)));
  const double phase1 = rng.uniform(0.0, 2.0 * M_PI);
  const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
  const double phase3 = rng.uniform(0.0, 2.0 * M_PI);
  Rng noise(rng.next_u64());

  const int64_t n = llround(duration_s * sample_rate);
  const double h1 = 1.0, h2 = 0.5, h3 = 0.25;
  const double enorm = 1.0 / std::sqrt(h1 * h1 + h2 * h2 + h3 * h3);
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double s = h1 * std::sin(2.0 * M_PI * f0 * t + phase1) +
               h2 * std::sin(2.0 * M_PI * 2.0 * f0 * t + phase2) +
               h3 * std::sin(2.0 * M_PI * 3.0 * f0 * t + phase3);
    out[static_cast<size_t>(i)] = amp * enorm * s + 0.01 * amp * noise.normal();
  }
  if (amplitude_out) *amplitude_out = amp;
  if (fundamental_out) *fundamental_out = f0;
  return out;
}

// Writes n clips in PMEmo layout (<root>/annotations.csv, <root>/audio/<id>.wav)
// and returns the records. Byte-identical for a given (n, seed, duration).
inline std::vector<ChorusRecord> synth_generate(const std::string& root, int n, uint64_t seed,
                                                double duration_s) {
  if (n < 1) throw std::invalid_argument("synth_generate: n must be >= 1");
  if (duration_s <= 0.0) throw std::invalid_argument("synth_generate: duration must be positive");
  std::filesystem::create_directories(std::filesystem::path(root) / "audio");

  std::vector<ChorusRecord> records;
  std::ostringstream csv;
  csv << "musicId,Valence(mean),Arousal(mean)\n";
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(i) + 1));
    const std::vector<double> samples = synth_clip(rng, duration_s, kSampleRate);

    ChorusRecord rec;
    rec.song_id = std::to_string(i + 1);
    rec.arousal_raw = arousal_from_rms(measure_rms(samples));
    rec.valence_raw = valence_from_centroid(measure_centroid(samples, kSampleRate));
    rec.audio_path =
        (std::filesystem::path(root) / "audio" / (rec.song_id + ".wav")).string();
    write_wav_f32(rec.audio_path, samples, kSampleRate);

    std::ostringstream row;
    row.precision(10);
    row << rec.song_id << "," << rec.valence_raw << "," << rec.arousal_raw << "\n";
    csv << row.str();
    records.push_back(std::move(rec));
  }
  std::ofstream f(std::filesystem::path(root) / "annotations.csv");
  if (!f) throw std::runtime_error("cannot write annotations.csv under " + root);
  f << csv.str();
  return records;
}

}  // namespace adff
