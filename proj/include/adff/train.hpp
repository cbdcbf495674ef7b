#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/dataset.hpp"
#include "adff/metrics.hpp"
#include "adff/model.hpp"
#include "adff/optim.hpp"
#include "adff/rng.hpp"

namespace adff {

struct FoldResult {
  std::optional<double> rmse_v, r2_v, rmse_a, r2_a;
  std::optional<double> acc_v, acc_a, acc_four;
  double wall_seconds = 0.0;
  std::vector<double> epoch_losses;  // mean train-mode batch loss per epoch
  double final_train_loss = 0.0;
};

struct CVReport {
  std::vector<FoldResult> folds;
  FoldResult mean;
  FoldResult stddev;  // sample standard deviation over folds
  double total_wall_seconds = 0.0;
};

struct TrainedFold {
  AdffModel model;
  FoldResult result;
};

namespace detail {

inline Tensor stack_batch(const std::vector<LabeledSegment>& segs, const std::vector<int>& idx,
                          size_t lo, size_t hi) {
  const auto& shape = segs[static_cast<size_t>(idx[lo])].input.shape();
  Tensor batch({static_cast<int>(hi - lo), shape[0], shape[1], shape[2]});
  const int64_t stride = segs[static_cast<size_t>(idx[lo])].input.size();
  for (size_t k = lo; k < hi; ++k) {
    const Tensor& in = segs[static_cast<size_t>(idx[k])].input;
    if (in.size() != stride) throw std::invalid_argument("segments have mixed shapes");
    std::copy(in.data(), in.data() + stride, batch.data() + static_cast<int64_t>(k - lo) * stride);
  }
  return batch;
}

inline Tensor regression_targets(const std::vector<LabeledSegment>& segs,
                                 const std::vector<int>& idx, size_t lo, size_t hi, Task task) {
  const int arity = task_arity(task);
  Tensor t({static_cast<int>(hi - lo), arity});
  for (size_t k = lo; k < hi; ++k) {
    const auto& s = segs[static_cast<size_t>(idx[k])];
    const int n = static_cast<int>(k - lo);
    if (task == Task::valence) t.at(n, 0) = s.valence;
    else if (task == Task::arousal) t.at(n, 0) = s.arousal;
    else {
      t.at(n, 0) = s.valence;
      t.at(n, 1) = s.arousal;
    }
  }
  return t;
}

inline std::vector<int> class_targets(const std::vector<LabeledSegment>& segs,
                                      const std::vector<int>& idx, size_t lo, size_t hi,
                                      Task task) {
  const ClassScheme scheme = (task == Task::two_v)   ? ClassScheme::two_v
                             : (task == Task::two_a) ? ClassScheme::two_a
                                                     : ClassScheme::four;
  std::vector<int> out;
  for (size_t k = lo; k < hi; ++k) {
    const auto& s = segs[static_cast<size_t>(idx[k])];
    out.push_back(to_class_labels(s.valence, s.arousal, scheme));
  }
  return out;
}

inline int argmax_row(const Tensor& t, int row) {
  int best = 0;
  for (int k = 1; k < t.dim(1); ++k)
    if (t.at(row, k) > t.at(row, best)) best = k;
  return best;
}

}  // namespace detail

// Evaluates a trained model on a segment list (eval mode, batched) and fills
// the task's metrics. Metrics are pooled over all segments first.
inline void evaluate_model(AdffModel& model, const std::vector<LabeledSegment>& segments,
                           int batch_size, FoldResult* out) {
  const Task task = model.config().task;
  std::vector<int> idx(segments.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> pred_v, pred_a, tgt_v, tgt_a;
  std::vector<int> pred_cls, tgt_cls;
  for (size_t lo = 0; lo < idx.size(); lo += static_cast<size_t>(batch_size)) {
    const size_t hi = std::min(idx.size(), lo + static_cast<size_t>(batch_size));
    const Tensor batch = detail::stack_batch(segments, idx, lo, hi);
    const Tensor pred = model.forward(batch, /*train=*/false);
    for (size_t k = lo; k < hi; ++k) {
      const auto& s = segments[static_cast<size_t>(idx[k])];
      const int n = static_cast<int>(k - lo);
      if (is_classification(task)) {
        pred_cls.push_back(detail::argmax_row(pred, n));
      } else if (task == Task::valence) {
        pred_v.push_back(pred.at(n, 0));
        tgt_v.push_back(s.valence);
      } else if (task == Task::arousal) {
        pred_a.push_back(pred.at(n, 0));
        tgt_a.push_back(s.arousal);
      } else {
        pred_v.push_back(pred.at(n, 0));
        tgt_v.push_back(s.valence);
        pred_a.push_back(pred.at(n, 1));
        tgt_a.push_back(s.arousal);
      }
    }
  }
  if (is_classification(task)) {
    tgt_cls = detail::class_targets(segments, idx, 0, idx.size(), task);
    const double acc = accuracy(pred_cls, tgt_cls);
    if (task == Task::two_v) out->acc_v = acc;
    else if (task == Task::two_a) out->acc_a = acc;
    else out->acc_four = acc;
  } else {
    if (!pred_v.empty()) {
      out->rmse_v = rmse(pred_v, tgt_v);
      out->r2_v = r2_score(pred_v, tgt_v);
    }
    if (!pred_a.empty()) {
      out->rmse_a = rmse(pred_a, tgt_a);
      out->r2_a = r2_score(pred_a, tgt_a);
    }
  }
}

// Trains one fold: seeded shuffled mini-batches, the milestone learning-rate
// schedule, and a final eval-mode pass over the held-out segments.
inline TrainedFold train_fold(const std::vector<LabeledSegment>& train_segments,
                              const std::vector<LabeledSegment>& test_segments,
                              const ModelConfig& model_config, const TrainConfig& train_config) {
  if (train_segments.empty()) throw std::invalid_argument("train_fold: empty train set");
  train_config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  AdffModel model(model_config, mix_seed(train_config.seed, 0x696e6974));
  Adam adam(model.parameters());
  Rng shuffle_rng(mix_seed(train_config.seed, 0x62617463));

  FoldResult result;
  const Task task = model_config.task;
  std::vector<int> order(train_segments.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, train_config);
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(train_config.batch_size)) {
      const size_t hi = std::min(order.size(), lo + static_cast<size_t>(train_config.batch_size));
      const Tensor batch = detail::stack_batch(train_segments, order, lo, hi);
      model.zero_grad();
      const Tensor pred = model.forward(batch, /*train=*/true);
      double loss;
      Tensor grad;
      if (is_classification(task)) {
        const auto classes = detail::class_targets(train_segments, order, lo, hi, task);
        loss = ce_loss(pred, classes, &grad);
      } else {
        const Tensor target = detail::regression_targets(train_segments, order, lo, hi, task);
        loss = mse_loss(pred, target, &grad);
      }
      if (!std::isfinite(loss))
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(batches));
      model.backward(grad);
      adam.step(model.parameters(), lr, train_config.weight_decay);
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / std::max(1, batches));
  }
  result.final_train_loss = result.epoch_losses.back();

  if (!test_segments.empty())
    evaluate_model(model, test_segments, train_config.batch_size, &result);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return TrainedFold{std::move(model), std::move(result)};
}

namespace detail {

using MetricField = std::optional<double> FoldResult::*;

constexpr MetricField kMetricFields[] = {&FoldResult::rmse_v, &FoldResult::r2_v,
                                         &FoldResult::rmse_a, &FoldResult::r2_a,
                                         &FoldResult::acc_v,  &FoldResult::acc_a,
                                         &FoldResult::acc_four};

inline void aggregate(const std::vector<FoldResult>& folds, FoldResult* mean, FoldResult* stddev) {
  for (MetricField field : kMetricFields) {
    std::vector<double> vals;
    for (const auto& f : folds)
      if (f.*field) vals.push_back(*(f.*field));
    if (vals.size() != folds.size() || vals.empty()) continue;
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    mean->*field = m;
    if (vals.size() > 1) {
      double s = 0.0;
      for (double v : vals) s += (v - m) * (v - m);
      stddev->*field = std::sqrt(s / static_cast<double>(vals.size() - 1));
    }
  }
  double wall = 0.0;
  for (const auto& f : folds) wall += f.wall_seconds;
  mean->wall_seconds = wall / static_cast<double>(folds.size());
}

}  // namespace detail

// 5-fold cross-validation over a corpus. Folds partition song ids, so every
// segment of a chorus stays on one side of each split. `fold_sink`, when set,
// receives each trained fold (for checkpointing).
inline CVReport cross_validate(
    const std::vector<ChorusRecord>& corpus, const DatasetSpec& dataset_spec,
    const ModelConfig& model_config, const TrainConfig& train_config,
    const std::function<void(int, TrainedFold&)>& fold_sink = nullptr,
    const std::string& cache_dir = "") {
  constexpr int kFolds = 5;
  if (static_cast<int>(corpus.size()) < kFolds)
    throw std::invalid_argument("cross_validate needs at least 5 songs");

  std::vector<LabeledSegment> segments;
  bool have_audio = true;
  for (const auto& rec : corpus)
    if (!std::filesystem::exists(rec.audio_path)) have_audio = false;
  if (have_audio) {
    segments = build_segments(corpus, dataset_spec);
  } else if (!cache_dir.empty()) {
    segments = build_segments_from_cache(corpus, dataset_spec, cache_dir);
  } else {
    throw std::runtime_error("cross_validate: no audio and no feature cache");
  }

  std::vector<std::string> ids;
  for (const auto& rec : corpus) ids.push_back(rec.song_id);
  const FoldPlan plan = kfold_split(ids, kFolds, dataset_spec.seed);

  const auto t0 = std::chrono::steady_clock::now();
  CVReport report;
  for (int k = 0; k < kFolds; ++k) {
    const auto& test_ids = plan.folds[static_cast<size_t>(k)];
    auto in_test = [&](const std::string& id) {
      return std::find(test_ids.begin(), test_ids.end(), id) != test_ids.end();
    };
    std::vector<LabeledSegment> train_set, test_set;
    for (const auto& seg : segments)
      (in_test(seg.song_id) ? test_set : train_set).push_back(seg);

    TrainConfig fold_cfg = train_config;
    fold_cfg.seed = train_config.seed + static_cast<uint64_t>(k);
    TrainedFold trained = train_fold(train_set, test_set, model_config, fold_cfg);
    if (fold_sink) fold_sink(k, trained);
    report.folds.push_back(std::move(trained.result));
  }
  detail::aggregate(report.folds, &report.mean, &report.stddev);
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace adff
