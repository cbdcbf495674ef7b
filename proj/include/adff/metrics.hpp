#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "adff/tensor.hpp"

namespace adff {

// Mean squared error over every element; also fills d(loss)/d(pred) if asked.
inline double mse_loss(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
  const int64_t n = pred.size();
  if (n == 0) throw std::invalid_argument("mse_loss: empty input");
  double acc = 0.0;
  if (grad) *grad = Tensor(pred.shape());
  for (int64_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
    if (grad) (*grad)[i] = 2.0 * d / static_cast<double>(n);
  }
  return acc / static_cast<double>(n);
}

// Softmax cross-entropy averaged over the batch. logits: (B, K).
inline double ce_loss(const Tensor& logits, const std::vector<int>& classes,
                      Tensor* grad = nullptr) {
  if (logits.ndim() != 2) throw std::invalid_argument("ce_loss: logits must be 2-d");
  const int B = logits.dim(0), K = logits.dim(1);
  if (static_cast<int>(classes.size()) != B)
    throw std::invalid_argument("ce_loss: batch size mismatch");
  if (grad) *grad = Tensor(logits.shape());
  double total = 0.0;
  for (int n = 0; n < B; ++n) {
    const int cls = classes[static_cast<size_t>(n)];
    if (cls < 0 || cls >= K) throw std::invalid_argument("ce_loss: class index out of range");
    double mx = logits.at(n, 0);
    for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at(n, k));
    double z = 0.0;
    for (int k = 0; k < K; ++k) z += std::exp(logits.at(n, k) - mx);
    const double logz = mx + std::log(z);
    total += logz - logits.at(n, cls);
    if (grad) {
      for (int k = 0; k < K; ++k) {
        const double p = std::exp(logits.at(n, k) - logz);
        grad->at(n, k) = (p - (k == cls ? 1.0 : 0.0)) / static_cast<double>(B);
      }
    }
  }
  return total / static_cast<double>(B);
}

inline double rmse(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("rmse: length mismatch or empty");
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Coefficient of determination, 1 - SS_res / SS_tot. Undefined for constant
// targets.
inline double r2_score(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.size() < 2)
    throw std::invalid_argument("r2_score: need at least two paired samples");
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double e = target[i] - pred[i];
    const double d = target[i] - mean;
    ss_res += e * e;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) throw std::invalid_argument("R^2 undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("accuracy: length mismatch or empty");
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == target[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace adff
