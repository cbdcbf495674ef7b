#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/lstm.hpp"
#include "adff/nn.hpp"
#include "adff/rng.hpp"
#include "adff/tensor.hpp"

namespace adff {

enum class Task { valence, arousal, multi, two_v, two_a, four };
enum class Variant { full, no_se, no_tflm };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::valence: return "valence";
    case Task::arousal: return "arousal";
    case Task::multi: return "multi";
    case Task::two_v: return "two_v";
    case Task::two_a: return "two_a";
    case Task::four: return "four";
  }
  return "?";
}

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_se: return "no_se";
    case Variant::no_tflm: return "no_tflm";
  }
  return "?";
}

inline bool is_classification(Task t) {
  return t == Task::two_v || t == Task::two_a || t == Task::four;
}

inline int task_arity(Task t) {
  switch (t) {
    case Task::valence:
    case Task::arousal: return 1;
    case Task::multi:
    case Task::two_v:
    case Task::two_a: return 2;
    case Task::four: return 4;
  }
  return 0;
}

struct ModelConfig {
  int seg_num = 6;          // input channels
  double width = 1.0;       // channel multiplier
  int se_reduction = 16;
  int lstm_hidden = 128;
  int lstm_layers = 2;
  std::vector<int> head_dims = {256, 64};
  Task task = Task::multi;
  Variant variant = Variant::full;
};

constexpr std::array<int, 5> kBaseChannels = {64, 128, 256, 512, 512};
constexpr std::array<int, 5> kConvsPerLevel = {2, 2, 3, 3, 3};

// Channels scale with width and never drop below the SE reduction factor.
inline std::array<int, 5> level_channels(const ModelConfig& cfg) {
  std::array<int, 5> ch;
  for (int i = 0; i < 5; ++i) {
    const int scaled = static_cast<int>(std::ceil(kBaseChannels[static_cast<size_t>(i)] * cfg.width));
    ch[static_cast<size_t>(i)] = std::max(cfg.se_reduction, scaled);
  }
  return ch;
}

// ---------------------------------------------------------------------------
// SE attention pieces (squeeze / excitation / rescale).

// se_squeeze: per-channel global spatial mean. (B, C, H, W) -> (B, C).
inline Tensor se_squeeze(const Tensor& s) {
  nn::SpatialMean m;
  return m.forward(s);
}

// se_scale: rescale channel c of sample n by a(n, c).
inline Tensor se_scale(const Tensor& s, const Tensor& a) {
  if (a.ndim() != 2 || a.dim(0) != s.dim(0) || a.dim(1) != s.dim(1))
    throw std::invalid_argument("se_scale: attention shape " + a.shape_str() +
                                " does not match feature " + s.shape_str());
  const int B = s.dim(0), C = s.dim(1);
  const int hw = s.dim(2) * s.dim(3);
  Tensor y(s.shape());
  for (int n = 0; n < B; ++n)
    for (int c = 0; c < C; ++c) {
      const double ac = a.at(n, c);
      const double* p = &s.at(n, c, 0, 0);
      double* q = &y.at(n, c, 0, 0);
      for (int i = 0; i < hw; ++i) q[i] = ac * p[i];
    }
  return y;
}

// Excitation: logistic(W2 relu(W1 z)), no biases. Bottleneck C/r, floored at 4.
class SeExcite {
 public:
  SeExcite() = default;
  SeExcite(int channels, int reduction)
      : reduce_(channels, std::max(4, channels / reduction), false),
        expand_(std::max(4, channels / reduction), channels, false) {}

  void init(Rng& rng) {
    reduce_.init(rng);
    expand_.init(rng);
  }

  Tensor forward(const Tensor& z) {
    return gate_.forward(expand_.forward(relu_.forward(reduce_.forward(z))));
  }

  Tensor backward(const Tensor& ga) {
    return reduce_.backward(relu_.backward(expand_.backward(gate_.backward(ga))));
  }

  void collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    reduce_.collect(prefix + ".reduce", out);
    expand_.collect(prefix + ".expand", out);
  }

 private:
  nn::Linear reduce_, expand_;
  nn::ReLU relu_;
  nn::Sigmoid gate_;
};

inline Tensor se_excite(const Tensor& z, SeExcite& excite) { return excite.forward(z); }

namespace detail {

// Channel rescale with caches for the backward pass.
class SeScaleOp {
 public:
  Tensor forward(const Tensor& s, const Tensor& a) {
    s_ = s;
    a_ = a;
    return se_scale(s, a);
  }

  // Returns gS; accumulates d/da into *ga.
  Tensor backward(const Tensor& gy, Tensor* ga) {
    const int B = s_.dim(0), C = s_.dim(1);
    const int hw = s_.dim(2) * s_.dim(3);
    Tensor gs(s_.shape());
    *ga = Tensor({B, C});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        const double ac = a_.at(n, c);
        const double* gp = &gy.at(n, c, 0, 0);
        const double* sp = &s_.at(n, c, 0, 0);
        double* gsp = &gs.at(n, c, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) {
          gsp[i] = ac * gp[i];
          acc += gp[i] * sp[i];
        }
        ga->at(n, c) = acc;
      }
    return gs;
  }

 private:
  Tensor s_, a_;
};

// Picks the final forward state and the final (time-zero) backward state of
// a bidirectional sequence: (B, T, 2h) -> (B, 2h).
class EstfSelect {
 public:
  Tensor forward(const Tensor& y) {
    T_ = y.dim(1);
    h2_ = y.dim(2);
    const int B = y.dim(0), h = h2_ / 2;
    Tensor e({B, h2_});
    for (int n = 0; n < B; ++n) {
      for (int j = 0; j < h; ++j) {
        e.at(n, j) = y.at(n, T_ - 1, j);
        e.at(n, h + j) = y.at(n, 0, h + j);
      }
    }
    return e;
  }

  Tensor backward(const Tensor& ge) {
    const int B = ge.dim(0), h = h2_ / 2;
    Tensor gy({B, T_, h2_});
    for (int n = 0; n < B; ++n)
      for (int j = 0; j < h; ++j) {
        gy.at(n, T_ - 1, j) = ge.at(n, j);
        gy.at(n, 0, h + j) = ge.at(n, h + j);
      }
    return gy;
  }

 private:
  int T_ = 0, h2_ = 0;
};

}  // namespace detail

// Concatenates the per-level ESTF vectors in level order.
inline Tensor fuse(const std::vector<Tensor>& estfs) {
  if (estfs.size() != 5) throw std::invalid_argument("fuse expects five ESTF levels");
  const int B = estfs[0].dim(0);
  int total = 0;
  for (const auto& e : estfs) total += e.dim(1);
  Tensor out({B, total});
  int off = 0;
  for (const auto& e : estfs) {
    for (int n = 0; n < B; ++n)
      for (int j = 0; j < e.dim(1); ++j) out.at(n, off + j) = e.at(n, j);
    off += e.dim(1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The ADFF network: five VGG-style spatial levels, each feeding an
// SE-gated bidirectional-LSTM branch; branch outputs are concatenated and
// mapped to the task output by the prediction head.
class AdffModel {
 public:
  AdffModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    if (cfg.width <= 0.0 || cfg.width > 1.0)
      throw std::invalid_argument("width must be in (0, 1]");
    if (cfg.lstm_hidden < 1) throw std::invalid_argument("lstm_hidden must be positive");
    if (cfg.seg_num < 1) throw std::invalid_argument("seg_num must be positive");
    const auto ch = level_channels(cfg);
    Rng rng(mix_seed(init_seed, 0x6d6f64656c));
    int prev = cfg.seg_num;
    for (int l = 0; l < 5; ++l) {
      Level& lev = levels_[static_cast<size_t>(l)];
      const int c = ch[static_cast<size_t>(l)];
      for (int j = 0; j < kConvsPerLevel[static_cast<size_t>(l)]; ++j) {
        lev.convs.emplace_back(j == 0 ? prev : c, c);
        lev.convs.back().init(rng);
        lev.conv_bns.emplace_back(c);
        lev.conv_relus.emplace_back();
      }
      lev.post_bn = nn::BatchNorm2d(c);
      lev.se = SeExcite(c, cfg.se_reduction);
      lev.se.init(rng);
      if (cfg.variant == Variant::no_tflm) {
        lev.bypass = nn::Linear(c, 2 * cfg.lstm_hidden);
        lev.bypass.init(rng);
      } else {
        lev.tflm = nn::BiLstm(c, cfg.lstm_hidden, cfg.lstm_layers);
        lev.tflm.init(rng);
      }
      prev = c;
    }
    const int fused = 5 * 2 * cfg.lstm_hidden;
    if (cfg.head_dims.size() != 2) throw std::invalid_argument("head_dims must list two sizes");
    head1_ = nn::Linear(fused, cfg.head_dims[0]);
    head2_ = nn::Linear(cfg.head_dims[0], cfg.head_dims[1]);
    head3_ = nn::Linear(cfg.head_dims[1], task_arity(cfg.task));
    head1_.init(rng);
    head2_.init(rng);
    head3_.init(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  // Runs the spatial trunk only and returns the five level outputs S_1..S_5.
  std::vector<Tensor> sflm_forward(const Tensor& input, bool train) {
    const Tensor x = as_batched(input);
    if (x.dim(1) != cfg_.seg_num)
      throw std::invalid_argument("input has " + std::to_string(x.dim(1)) +
                                  " channels, model expects " + std::to_string(cfg_.seg_num));
    if (x.dim(2) < 32 || x.dim(3) < 32)
      throw std::invalid_argument("input too small for five poolings: " + x.shape_str());
    std::vector<Tensor> s;
    Tensor cur = x;
    for (auto& lev : levels_) {
      for (size_t j = 0; j < lev.convs.size(); ++j)
        cur = lev.conv_relus[j].forward(lev.conv_bns[j].forward(lev.convs[j].forward(cur), train));
      cur = lev.post_relu.forward(lev.post_bn.forward(lev.pool.forward(cur), train));
      s.push_back(cur);
    }
    return s;
  }

  // Full forward pass. Accepts (seg_num, T', 128) or batched (B, seg_num, T', 128);
  // returns (arity) or (B, arity) correspondingly.
  Tensor forward(const Tensor& input, bool train) {
    const bool batched = input.ndim() == 4;
    const std::vector<Tensor> s = sflm_forward(input, train);
    std::vector<Tensor> estfs;
    for (int l = 0; l < 5; ++l) {
      Level& lev = levels_[static_cast<size_t>(l)];
      const Tensor& sl = s[static_cast<size_t>(l)];
      Tensor e;
      if (cfg_.variant == Variant::no_tflm) {
        e = lev.bypass.forward(lev.squeeze.forward(sl));
      } else {
        Tensor shat;
        if (cfg_.variant == Variant::no_se) {
          shat = sl;
        } else {
          const Tensor a = lev.se.forward(lev.squeeze.forward(sl));
          shat = lev.scale.forward(sl, a);
        }
        e = lev.estf.forward(lev.tflm.forward(lev.fmean.forward(shat)));
      }
      estfs.push_back(std::move(e));
    }
    const Tensor fused = fuse(estfs);
    Tensor out = head3_.forward(
        head_relu2_.forward(head2_.forward(head_relu1_.forward(head1_.forward(fused)))));
    if (!batched) out = out.reshaped({out.dim(1)});
    return out;
  }

  // Backpropagates from d(loss)/d(output), accumulating parameter gradients.
  // Returns the gradient with respect to the input.
  Tensor backward(const Tensor& gout) {
    Tensor g = as_batched_2d(gout);
    g = head1_.backward(head_relu1_.backward(
        head2_.backward(head_relu2_.backward(head3_.backward(g)))));

    const int B = g.dim(0);
    const int h2 = 2 * cfg_.lstm_hidden;
    std::vector<Tensor> gs(5);
    for (int l = 0; l < 5; ++l) {
      Tensor ge({B, h2});
      for (int n = 0; n < B; ++n)
        for (int j = 0; j < h2; ++j) ge.at(n, j) = g.at(n, l * h2 + j);
      Level& lev = levels_[static_cast<size_t>(l)];
      if (cfg_.variant == Variant::no_tflm) {
        gs[static_cast<size_t>(l)] = lev.squeeze.backward(lev.bypass.backward(ge));
      } else {
        Tensor gshat = lev.fmean.backward(lev.tflm.backward(lev.estf.backward(ge)));
        if (cfg_.variant == Variant::no_se) {
          gs[static_cast<size_t>(l)] = std::move(gshat);
        } else {
          Tensor ga;
          Tensor gsl = lev.scale.backward(gshat, &ga);
          const Tensor gz = lev.se.backward(ga);
          const Tensor gsq = lev.squeeze.backward(gz);
          for (int64_t i = 0; i < gsl.size(); ++i) gsl[i] += gsq[i];
          gs[static_cast<size_t>(l)] = std::move(gsl);
        }
      }
    }

    Tensor gcur;
    for (int l = 4; l >= 0; --l) {
      Level& lev = levels_[static_cast<size_t>(l)];
      Tensor gl = std::move(gs[static_cast<size_t>(l)]);
      if (l < 4) {
        for (int64_t i = 0; i < gl.size(); ++i) gl[i] += gcur[i];
      }
      Tensor t = lev.pool.backward(lev.post_bn.backward(lev.post_relu.backward(gl)));
      for (size_t j = lev.convs.size(); j-- > 0;)
        t = lev.convs[j].backward(lev.conv_bns[j].backward(lev.conv_relus[j].backward(t)));
      gcur = std::move(t);
    }
    return gcur;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->zero();
  }

  // Trainable parameters in a stable order.
  std::vector<nn::ParamRef> parameters() {
    std::vector<nn::ParamRef> out;
    for (int l = 0; l < 5; ++l) {
      Level& lev = levels_[static_cast<size_t>(l)];
      const std::string base = "level" + std::to_string(l + 1);
      for (size_t j = 0; j < lev.convs.size(); ++j) {
        lev.convs[j].collect(base + ".conv" + std::to_string(j + 1), out);
        lev.conv_bns[j].collect(base + ".bn" + std::to_string(j + 1), out);
      }
      lev.post_bn.collect(base + ".post_bn", out);
      lev.se.collect(base + ".se", out);
      if (cfg_.variant == Variant::no_tflm)
        lev.bypass.collect(base + ".bypass", out);
      else
        lev.tflm.collect(base + ".tflm", out);
    }
    head1_.collect("head.fc1", out);
    head2_.collect("head.fc2", out);
    head3_.collect("head.fc3", out);
    return out;
  }

  // Every tensor that belongs in a checkpoint: trainable parameters plus the
  // batch-norm running statistics.
  std::vector<std::pair<std::string, Tensor*>> named_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& p : parameters()) out.emplace_back(p.name, p.value);
    for (int l = 0; l < 5; ++l) {
      Level& lev = levels_[static_cast<size_t>(l)];
      const std::string base = "level" + std::to_string(l + 1);
      for (size_t j = 0; j < lev.conv_bns.size(); ++j) {
        out.emplace_back(base + ".bn" + std::to_string(j + 1) + ".run_mean",
                         &lev.conv_bns[j].run_mean);
        out.emplace_back(base + ".bn" + std::to_string(j + 1) + ".run_var",
                         &lev.conv_bns[j].run_var);
      }
      out.emplace_back(base + ".post_bn.run_mean", &lev.post_bn.run_mean);
      out.emplace_back(base + ".post_bn.run_var", &lev.post_bn.run_var);
    }
    return out;
  }

  // Direct access to one level's SE excitation, e.g. for probing attention.
  SeExcite& se_excite_at(int level) { return levels_[static_cast<size_t>(level)].se; }

 private:
  static Tensor as_batched(const Tensor& x) {
    if (x.ndim() == 4) return x;
    if (x.ndim() == 3) return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
    throw std::invalid_argument("model input must be 3-d or 4-d, got " + x.shape_str());
  }

  static Tensor as_batched_2d(const Tensor& g) {
    if (g.ndim() == 2) return g;
    if (g.ndim() == 1) return g.reshaped({1, g.dim(0)});
    throw std::invalid_argument("output gradient must be 1-d or 2-d");
  }

  struct Level {
    std::vector<nn::Conv2d> convs;
    std::vector<nn::BatchNorm2d> conv_bns;
    std::vector<nn::ReLU> conv_relus;
    nn::MaxPool2d pool;
    nn::BatchNorm2d post_bn;
    nn::ReLU post_relu;
    nn::SpatialMean squeeze;
    SeExcite se;
    detail::SeScaleOp scale;
    nn::FreqMean fmean;
    nn::BiLstm tflm;
    detail::EstfSelect estf;
    nn::Linear bypass;
  };

  ModelConfig cfg_;
  std::array<Level, 5> levels_;
  nn::Linear head1_, head2_, head3_;
  nn::ReLU head_relu1_, head_relu2_;
};

}  // namespace adff
