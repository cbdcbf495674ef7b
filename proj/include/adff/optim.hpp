#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/nn.hpp"
#include "adff/tensor.hpp"

namespace adff {

struct TrainConfig {
  double lr0 = 1e-5;
  double weight_decay = 1e-5;
  int epochs = 200;
  int batch_size = 32;
  std::vector<int> milestones = {20, 45, 80, 110, 140, 170};
  double decay_factor = 0.5;
  uint64_t seed = 1;

  void validate() const {
    if (lr0 <= 0.0) throw std::invalid_argument("lr0 must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (decay_factor <= 0.0 || decay_factor >= 1.0)
      throw std::invalid_argument("decay_factor must lie in (0, 1)");
    for (size_t i = 0; i < milestones.size(); ++i) {
      if (milestones[i] >= epochs)
        throw std::invalid_argument("milestones must be smaller than epochs");
      if (i > 0 && milestones[i] <= milestones[i - 1])
        throw std::invalid_argument("milestones must be strictly increasing");
    }
  }
};

// Stepped decay: lr0 * factor^(number of milestones <= epoch).
inline double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw std::invalid_argument("epoch out of range");
  int passed = 0;
  for (int m : cfg.milestones)
    if (m <= epoch) ++passed;
  return cfg.lr0 * std::pow(cfg.decay_factor, passed);
}

// Adam with L2-style weight decay folded into the gradient before the moment
// updates. Parameters are updated in place.
class Adam {
 public:
  explicit Adam(const std::vector<nn::ParamRef>& params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }

  int64_t step_count() const { return step_; }

  void step(const std::vector<nn::ParamRef>& params, double lr, double weight_decay) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t k = 0; k < params.size(); ++k) {
      Tensor& value = *params[k].value;
      const Tensor& grad = *params[k].grad;
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (int64_t i = 0; i < value.size(); ++i) {
        double g = grad[i];
        if (!std::isfinite(g))
          throw std::runtime_error("non-finite gradient in '" + params[k].name + "' at step " +
                                   std::to_string(step_));
        g += weight_decay * value[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<Tensor> m_, v_;
};

// Single Adam update over an explicit parameter list; convenience wrapper for
// callers that manage state themselves.
inline void adam_step(const std::vector<nn::ParamRef>& params, Adam& state, double lr,
                      double weight_decay) {
  state.step(params, lr, weight_decay);
}

}  // namespace adff
