#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/audio.hpp"
#include "adff/tensor.hpp"

namespace adff {

constexpr int kMelBands = 128;
constexpr double kHopSeconds = 0.010;
constexpr double kWindowSeconds = 0.060;
constexpr int kHopSamples = 441;    // 10 ms at 44.1 kHz
constexpr int kWinSamples = 2646;   // 60 ms at 44.1 kHz; also the transform size
constexpr int kSpectrumBins = kWinSamples / 2 + 1;  // 1324 one-sided bins
constexpr double kLogEps = 1e-6;
constexpr int kFrontendVersion = 1;

struct MelSpectrogram {
  Tensor data;  // (T, 128) natural-log power
  int sample_rate = kSampleRate;
  double hop_seconds = kHopSeconds;
  double window_seconds = kWindowSeconds;

  int frames() const { return data.ndim() ? data.dim(0) : 0; }
};

// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

namespace detail {

// FFTW plan creation is not thread-safe; execution on private buffers is.
inline std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    in_ = fftw_alloc_real(static_cast<size_t>(n));
    out_ = fftw_alloc_complex(static_cast<size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("fftw plan creation failed");
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // One-sided power spectrum of n input samples into bins[0 .. n/2].
  void power(const double* x, double* bins) {
    for (int i = 0; i < n_; ++i) in_[i] = x[i];
    fftw_execute(plan_);
    for (int k = 0; k <= n_ / 2; ++k)
      bins[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

// Reflect-padding lookup: mirrors around the signal edges without repeating
// them, bouncing as often as needed.
inline double reflect_sample(const std::vector<double>& x, int64_t i) {
  const int64_t n = static_cast<int64_t>(x.size());
  if (n == 1) return x[0];
  const int64_t period = 2 * (n - 1);
  int64_t j = i % period;
  if (j < 0) j += period;
  if (j >= n) j = period - j;
  return x[static_cast<size_t>(j)];
}

}  // namespace detail

// Power spectrum of a single already-extracted frame (window applied here).
// Exposed so the transform can be checked against a direct DFT.
inline std::vector<double> stft_frame_power(const std::vector<double>& frame,
                                            const std::vector<double>& window) {
  if (frame.size() != window.size()) throw std::invalid_argument("frame/window length mismatch");
  const int n = static_cast<int>(frame.size());
  std::vector<double> windowed(frame.size());
  for (int i = 0; i < n; ++i)
    windowed[static_cast<size_t>(i)] = frame[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
  detail::RealFft fft(n);
  std::vector<double> bins(static_cast<size_t>(n / 2 + 1));
  fft.power(windowed.data(), bins.data());
  return bins;
}

// Magnitude-squared short-time spectrum: Hann window of 2646 samples, hop 441,
// reflect-centred frames, so T = 1 + floor(n_samples / 441).
inline Tensor stft_power(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate)
    throw std::invalid_argument("stft_power expects 44.1 kHz input");
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  if (n < kHopSamples) throw std::runtime_error("clip shorter than one hop");
  const int frames = 1 + static_cast<int>(n / kHopSamples);
  const std::vector<double> window = hann_window(kWinSamples);
  const int pad = kWinSamples / 2;

  Tensor power({frames, kSpectrumBins});
  detail::RealFft fft(kWinSamples);
  std::vector<double> buf(static_cast<size_t>(kWinSamples));
  for (int t = 0; t < frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * kHopSamples - pad;
    for (int i = 0; i < kWinSamples; ++i) {
      const int64_t src = start + i;
      const double s = (src >= 0 && src < n) ? clip.samples[static_cast<size_t>(src)]
                                             : detail::reflect_sample(clip.samples, src);
      buf[static_cast<size_t>(i)] = s * window[static_cast<size_t>(i)];
    }
    fft.power(buf.data(), &power.at(t, 0));
  }
  return power;
}

// Slaney mel scale (linear below 1 kHz, logarithmic above).
inline double hz_to_mel(double hz) {
  constexpr double lin = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / lin;
  const double log_step = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / lin;
  return min_log_mel + std::log(hz / min_log_hz) / log_step;
}

inline double mel_to_hz(double mel) {
  constexpr double lin = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / lin;
  const double log_step = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * lin;
  return min_log_hz * std::exp((mel - min_log_mel) * log_step);
}

// Triangular mel filterbank, area-normalized, stored sparsely per band.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, int n_fft, int sample_rate, double fmin, double fmax)
      : n_mels_(n_mels), n_bins_(n_fft / 2 + 1) {
    const double mel_lo = hz_to_mel(fmin);
    const double mel_hi = hz_to_mel(fmax);
    std::vector<double> hz(static_cast<size_t>(n_mels + 2));
    for (int i = 0; i < n_mels + 2; ++i)
      hz[static_cast<size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

    starts_.resize(static_cast<size_t>(n_mels));
    weights_.resize(static_cast<size_t>(n_mels));
    for (int m = 0; m < n_mels; ++m) {
      const double lo = hz[static_cast<size_t>(m)];
      const double mid = hz[static_cast<size_t>(m + 1)];
      const double hi = hz[static_cast<size_t>(m + 2)];
      const double enorm = 2.0 / (hi - lo);
      int start = -1;
      std::vector<double> w;
      for (int k = 0; k < n_bins_; ++k) {
        const double f = static_cast<double>(k) * sample_rate / n_fft;
        const double up = (f - lo) / (mid - lo);
        const double down = (hi - f) / (hi - mid);
        const double v = std::max(0.0, std::min(up, down)) * enorm;
        if (v > 0.0) {
          if (start < 0) start = k;
          w.push_back(v);
        } else if (start >= 0) {
          break;  // support is contiguous
        }
      }
      starts_[static_cast<size_t>(m)] = std::max(start, 0);
      weights_[static_cast<size_t>(m)] = std::move(w);
    }
  }

  int bands() const { return n_mels_; }
  int bins() const { return n_bins_; }

  // Dense (bands x bins) matrix view of the filters.
  Tensor dense() const {
    Tensor m({n_mels_, n_bins_});
    for (int b = 0; b < n_mels_; ++b) {
      const auto& w = weights_[static_cast<size_t>(b)];
      for (size_t i = 0; i < w.size(); ++i)
        m.at(b, starts_[static_cast<size_t>(b)] + static_cast<int>(i)) = w[i];
    }
    return m;
  }

  // out[b] = sum_k filter[b][k] * bins[k], accumulated in ascending bin order.
  // std::fma pins the accumulation arithmetic so the result is bit-identical
  // to a plain dense product written the same way.
  void apply(const double* bins, double* out) const {
    for (int b = 0; b < n_mels_; ++b) {
      const auto& w = weights_[static_cast<size_t>(b)];
      const double* src = bins + starts_[static_cast<size_t>(b)];
      double acc = 0.0;
      for (size_t i = 0; i < w.size(); ++i) acc = std::fma(w[i], src[i], acc);
      out[b] = acc;
    }
  }

 private:
  int n_mels_;
  int n_bins_;
  std::vector<int> starts_;
  std::vector<std::vector<double>> weights_;
};

inline const MelFilterbank& default_filterbank() {
  static const MelFilterbank fb(kMelBands, kWinSamples, kSampleRate, 0.0, kSampleRate / 2.0);
  return fb;
}

// Projects a (T x bins) power spectrum onto the mel bands: out = power x M.
inline Tensor mel_project(const Tensor& power, const MelFilterbank& fb = default_filterbank()) {
  if (power.ndim() != 2 || power.dim(1) != fb.bins())
    throw std::invalid_argument("mel_project: spectrum has " +
                                std::to_string(power.ndim() == 2 ? power.dim(1) : -1) +
                                " bins, filterbank expects " + std::to_string(fb.bins()));
  const int frames = power.dim(0);
  Tensor mel({frames, fb.bands()});
  for (int t = 0; t < frames; ++t) fb.apply(&power.at(t, 0), &mel.at(t, 0));
  return mel;
}

// Elementwise ln(x + 1e-6); rejects negative input.
inline Tensor log_compress(const Tensor& mel) {
  Tensor out = mel;
  for (int64_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0.0) throw std::invalid_argument("log_compress: negative input entry");
    out[i] = std::log(out[i] + kLogEps);
  }
  return out;
}

// Full frontend: log(mel(stft_power(clip)) + eps) with extraction metadata.
inline MelSpectrogram extract(const AudioClip& clip) {
  MelSpectrogram spec;
  spec.data = log_compress(mel_project(stft_power(clip)));
  spec.sample_rate = clip.sample_rate;
  return spec;
}

}  // namespace adff
