#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/audio.hpp"
#include "adff/cache.hpp"
#include "adff/frontend.hpp"
#include "adff/rng.hpp"
#include "adff/tensor.hpp"

namespace adff {

struct ChorusRecord {
  std::string song_id;
  std::string audio_path;
  double valence_raw = 0.0;  // [0, 1]
  double arousal_raw = 0.0;  // [0, 1]
};

enum class DatasetMode { simple, full };

inline std::string to_string(DatasetMode m) {
  return m == DatasetMode::simple ? "simple" : "full";
}

struct DatasetSpec {
  DatasetMode mode = DatasetMode::simple;
  double seg_len = 20.0;  // seconds
  int seg_num = 6;
  uint64_t seed = 1;
};

// One clip window in seconds. A window shorter than seg_len (whole-chorus
// case) is zero-padded downstream.
struct ClipWindow {
  double start_s = 0.0;
  double len_s = 0.0;

  bool needs_padding(double seg_len) const { return len_s < seg_len; }
};

struct LabeledSegment {
  Tensor input;  // (seg_num, T', 128)
  double valence = 0.0;  // [-1, 1]
  double arousal = 0.0;  // [-1, 1]
  std::string song_id;
};

struct FoldPlan {
  std::vector<std::vector<std::string>> folds;
};

struct PmemoColumns {
  std::string id = "musicId";
  std::string valence = "Valence(mean)";
  std::string arousal = "Arousal(mean)";
};

// Maps a raw [0,1] annotation onto the [-1,1] training scale.
inline double scale_annotation(double raw) {
  if (raw < 0.0 || raw > 1.0) throw std::invalid_argument("raw annotation out of range");
  return 2.0 * raw - 1.0;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// Loads a PMEmo-format corpus: <root>/annotations.csv plus
// <root>/audio/<song_id>.wav. Rows whose audio is missing are reported via
// `warnings` and skipped.
inline std::vector<ChorusRecord> load_pmemo(const std::string& root,
                                            const PmemoColumns& cols = PmemoColumns{},
                                            std::vector<std::string>* warnings = nullptr) {
  const auto csv_path = std::filesystem::path(root) / "annotations.csv";
  std::ifstream f(csv_path);
  if (!f) throw std::runtime_error("missing annotations CSV: " + csv_path.string());
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("empty annotations CSV");
  const auto header = detail::split_csv_line(line);
  auto col_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("annotations CSV misses column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  const size_t ci = col_index(cols.id);
  const size_t cv = col_index(cols.valence);
  const size_t ca = col_index(cols.arousal);

  std::vector<ChorusRecord> records;
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() <= std::max({ci, cv, ca}))
      throw std::runtime_error("short annotations row: " + line);
    ChorusRecord rec;
    rec.song_id = fields[ci];
    rec.valence_raw = std::stod(fields[cv]);
    rec.arousal_raw = std::stod(fields[ca]);
    if (rec.valence_raw < 0.0 || rec.valence_raw > 1.0 || rec.arousal_raw < 0.0 ||
        rec.arousal_raw > 1.0)
      throw std::runtime_error("raw annotation out of range for song " + rec.song_id);
    rec.audio_path = (std::filesystem::path(root) / "audio" / (rec.song_id + ".wav")).string();
    if (!std::filesystem::exists(rec.audio_path)) {
      if (warnings) warnings->push_back("missing audio for song " + rec.song_id + ", skipped");
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw std::runtime_error("no parsable rows in " + csv_path.string());
  return records;
}

// Simple mode: one window per chorus, drawn once per (chorus, seed). The rng
// must be the chorus's own derived stream so the draw is independent of
// processing order.
inline ClipWindow cut_simple(double duration_s, const DatasetSpec& spec, Rng& rng) {
  if (duration_s < spec.seg_len) return ClipWindow{0.0, duration_s};
  const double start = rng.uniform(0.0, duration_s - spec.seg_len);
  return ClipWindow{start, spec.seg_len};
}

inline Rng chorus_rng(const DatasetSpec& spec, const std::string& song_id) {
  return Rng(mix_seed(spec.seed, fnv1a64(song_id)));
}

// Full mode: consecutive windows of seg_len; a tail shorter than seg_len/2 is
// dropped, otherwise the last window is slid back so it ends at the chorus
// end. Choruses shorter than seg_len yield one to-be-padded window.
inline std::vector<ClipWindow> cut_full(double duration_s, double seg_len) {
  std::vector<ClipWindow> windows;
  if (duration_s < seg_len) {
    windows.push_back(ClipWindow{0.0, duration_s});
    return windows;
  }
  const int whole = static_cast<int>(std::floor(duration_s / seg_len));
  for (int i = 0; i < whole; ++i)
    windows.push_back(ClipWindow{i * seg_len, seg_len});
  const double remainder = duration_s - whole * seg_len;
  if (remainder >= seg_len / 2.0 && remainder > 0.0)
    windows.push_back(ClipWindow{duration_s - seg_len, seg_len});
  return windows;
}

// Stacks rows [c*T', (c+1)*T') of a (T x 128) spectrogram into channel c,
// with T' = floor(T / seg_num); up to seg_num-1 trailing rows are discarded.
inline Tensor segment_stack(const Tensor& mel, int seg_num) {
  if (mel.ndim() != 2) throw std::invalid_argument("segment_stack expects a 2-d spectrogram");
  const int frames = mel.dim(0);
  const int bands = mel.dim(1);
  if (seg_num < 1 || seg_num > frames)
    throw std::invalid_argument("seg_num must be in [1, frame count]");
  const int sub = frames / seg_num;
  Tensor out({seg_num, sub, bands});
  for (int c = 0; c < seg_num; ++c)
    for (int t = 0; t < sub; ++t)
      for (int b = 0; b < bands; ++b) out.at(c, t, b) = mel.at(c * sub + t, b);
  return out;
}

// Shuffles song ids by seed and deals them into k near-equal folds
// (sizes differ by at most one).
inline FoldPlan kfold_split(std::vector<std::string> song_ids, int k, uint64_t seed) {
  if (static_cast<int>(song_ids.size()) < k)
    throw std::invalid_argument("fewer song ids than folds");
  Rng rng(mix_seed(seed, 0x666f6c64));  // "fold" stream
  rng.shuffle(song_ids);
  FoldPlan plan;
  plan.folds.resize(static_cast<size_t>(k));
  const int n = static_cast<int>(song_ids.size());
  const int base = n / k;
  const int extra = n % k;
  int pos = 0;
  for (int i = 0; i < k; ++i) {
    const int take = base + (i < extra ? 1 : 0);
    for (int j = 0; j < take; ++j) plan.folds[static_cast<size_t>(i)].push_back(song_ids[static_cast<size_t>(pos++)]);
  }
  return plan;
}

enum class ClassScheme { two_v, two_a, four };

// Sign-based class labels; zero counts as positive.
inline int to_class_labels(double valence, double arousal, ClassScheme scheme) {
  switch (scheme) {
    case ClassScheme::two_v: return valence >= 0.0 ? 1 : 0;
    case ClassScheme::two_a: return arousal >= 0.0 ? 1 : 0;
    case ClassScheme::four: return 2 * (arousal >= 0.0 ? 1 : 0) + (valence >= 0.0 ? 1 : 0);
  }
  throw std::logic_error("unknown class scheme");
}

// ---------------------------------------------------------------------------
// Segment assembly

// Cuts windows for one chorus according to the dataset spec.
inline std::vector<ClipWindow> cut_windows(const DatasetSpec& spec, const std::string& song_id,
                                           double duration_s) {
  if (spec.mode == DatasetMode::simple) {
    Rng rng = chorus_rng(spec, song_id);
    return {cut_simple(duration_s, spec, rng)};
  }
  return cut_full(duration_s, spec.seg_len);
}

// Builds the stacked input for one window by extracting features from the
// window's (zero-padded) audio.
inline Tensor window_input(const AudioClip& clip, const ClipWindow& win, const DatasetSpec& spec) {
  const int64_t n = static_cast<int64_t>(clip.samples.size());
  const int64_t s0 = llround(win.start_s * clip.sample_rate);
  const int64_t s1 = std::min<int64_t>(n, s0 + llround(win.len_s * clip.sample_rate));
  AudioClip piece;
  piece.sample_rate = clip.sample_rate;
  piece.samples.assign(clip.samples.begin() + s0, clip.samples.begin() + s1);
  piece = pad_to_length(std::move(piece), spec.seg_len);
  return segment_stack(extract(piece).data, spec.seg_num);
}

// Builds all labeled segments for a corpus. Features are extracted from the
// audio files; each window of a chorus carries that chorus's static labels.
inline std::vector<LabeledSegment> build_segments(const std::vector<ChorusRecord>& records,
                                                  const DatasetSpec& spec) {
  std::vector<LabeledSegment> segments;
  for (const auto& rec : records) {
    const AudioClip clip = load_audio(rec.audio_path);
    for (const auto& win : cut_windows(spec, rec.song_id, clip.duration_s())) {
      LabeledSegment seg;
      seg.input = window_input(clip, win, spec);
      seg.valence = scale_annotation(rec.valence_raw);
      seg.arousal = scale_annotation(rec.arousal_raw);
      seg.song_id = rec.song_id;
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

// Cache-backed fallback used when the audio files are absent: windows are cut
// in the frame domain from the cached whole-chorus spectrogram, padding short
// windows with the log level of silence.
inline std::vector<LabeledSegment> build_segments_from_cache(
    const std::vector<ChorusRecord>& records, const DatasetSpec& spec,
    const std::string& cache_dir) {
  const int frames_per_window = 1 + static_cast<int>(llround(spec.seg_len * kSampleRate) / kHopSamples);
  const double silence = std::log(kLogEps);
  std::vector<LabeledSegment> segments;
  for (const auto& rec : records) {
    const MelSpectrogram spec_full = read_feature_cache(cache_dir, rec.song_id);
    const int frames = spec_full.frames();
    const double duration_s = (frames - 1) * kHopSeconds;
    for (const auto& win : cut_windows(spec, rec.song_id, duration_s)) {
      const int f0 = static_cast<int>(llround(win.start_s / kHopSeconds));
      Tensor mel({frames_per_window, kMelBands});
      for (int t = 0; t < frames_per_window; ++t)
        for (int b = 0; b < kMelBands; ++b)
          mel.at(t, b) = (f0 + t < frames) ? spec_full.data.at(f0 + t, b) : silence;
      LabeledSegment seg;
      seg.input = segment_stack(mel, spec.seg_num);
      seg.valence = scale_annotation(rec.valence_raw);
      seg.arousal = scale_annotation(rec.arousal_raw);
      seg.song_id = rec.song_id;
      segments.push_back(std::move(seg));
    }
  }
  return segments;
}

}  // namespace adff
