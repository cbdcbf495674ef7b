#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/rng.hpp"
#include "adff/tensor.hpp"

namespace adff::nn {

using adff::Rng;
using adff::Tensor;

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Conv2d: 3x3 kernel, stride 1, padding 1. Activations are (B, C, H, W).
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch)
      : in_ch_(in_ch),
        out_ch_(out_ch),
        w({out_ch, in_ch, 3, 3}),
        b({out_ch}),
        gw({out_ch, in_ch, 3, 3}),
        gb({out_ch}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch_) * 9.0);
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }

  Tensor forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != in_ch_)
      throw std::invalid_argument("Conv2d: bad input shape " + x.shape_str());
    x_ = x;
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    Tensor y({B, out_ch_, H, W});
    for (int n = 0; n < B; ++n) {
      for (int co = 0; co < out_ch_; ++co) {
        double* yrow = &y.at(n, co, 0, 0);
        const double bias = b[co];
        for (int i = 0; i < H * W; ++i) yrow[i] = bias;
        for (int ci = 0; ci < in_ch_; ++ci) {
          const double* xch = &x.at(n, ci, 0, 0);
          for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
              const double kv = w.at(co, ci, kh, kw);
              const int w0 = (kw == 0) ? 1 : 0;
              const int w1 = (kw == 2) ? W - 1 : W;
              for (int h = 0; h < H; ++h) {
                const int ih = h + kh - 1;
                if (ih < 0 || ih >= H) continue;
                const double* src = xch + ih * W + (kw - 1);
                double* dst = yrow + h * W;
                for (int j = w0; j < w1; ++j) dst[j] += kv * src[j];
              }
            }
          }
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
    Tensor gx({B, in_ch_, H, W});
    for (int n = 0; n < B; ++n) {
      for (int co = 0; co < out_ch_; ++co) {
        const double* grow = &gy.at(n, co, 0, 0);
        double gbias = 0.0;
        for (int i = 0; i < H * W; ++i) gbias += grow[i];
        gb[co] += gbias;
        for (int ci = 0; ci < in_ch_; ++ci) {
          const double* xch = &x_.at(n, ci, 0, 0);
          double* gxch = &gx.at(n, ci, 0, 0);
          for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
              const double kv = w.at(co, ci, kh, kw);
              double gkv = 0.0;
              const int w0 = (kw == 0) ? 1 : 0;
              const int w1 = (kw == 2) ? W - 1 : W;
              for (int h = 0; h < H; ++h) {
                const int ih = h + kh - 1;
                if (ih < 0 || ih >= H) continue;
                const double* xsrc = xch + ih * W + (kw - 1);
                double* gdst = gxch + ih * W + (kw - 1);
                const double* g = grow + h * W;
                double acc = 0.0;
                for (int j = w0; j < w1; ++j) {
                  acc += g[j] * xsrc[j];
                  gdst[j] += kv * g[j];
                }
                gkv += acc;
              }
              gw.at(co, ci, kh, kw) += gkv;
            }
          }
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
  }

  int out_channels() const { return out_ch_; }

  Tensor w, b, gw, gb;

 private:
  int in_ch_ = 0, out_ch_ = 0;
  Tensor x_;
};

// ---------------------------------------------------------------------------
// BatchNorm2d over (B, H, W) per channel. Train mode normalizes with batch
// statistics and updates the running ones; eval mode uses the running pair.
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels)
      : ch_(channels),
        gamma({channels}),
        beta({channels}),
        ggamma({channels}),
        gbeta({channels}),
        run_mean({channels}),
        run_var({channels}) {
    gamma.fill(1.0);
    run_var.fill(1.0);
  }

  Tensor forward(const Tensor& x, bool train) {
    if (x.ndim() != 4 || x.dim(1) != ch_)
      throw std::invalid_argument("BatchNorm2d: bad input shape " + x.shape_str());
    train_ = train;
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t n = static_cast<int64_t>(B) * H * W;
    n_ = n;
    xhat_ = Tensor(x.shape());
    inv_std_ = Tensor({ch_});
    centered_ = Tensor(x.shape());
    Tensor y(x.shape());
    for (int c = 0; c < ch_; ++c) {
      double mean, var;
      if (train) {
        double s = 0.0;
        for (int b = 0; b < B; ++b) {
          const double* p = &x.at(b, c, 0, 0);
          for (int i = 0; i < H * W; ++i) s += p[i];
        }
        mean = s / static_cast<double>(n);
        double sv = 0.0;
        for (int b = 0; b < B; ++b) {
          const double* p = &x.at(b, c, 0, 0);
          for (int i = 0; i < H * W; ++i) {
            const double d = p[i] - mean;
            sv += d * d;
          }
        }
        var = sv / static_cast<double>(n);  // biased, used for normalization
        run_mean[c] = (1.0 - momentum_) * run_mean[c] + momentum_ * mean;
        const double var_unbiased = (n > 1) ? sv / static_cast<double>(n - 1) : var;
        run_var[c] = (1.0 - momentum_) * run_var[c] + momentum_ * var_unbiased;
      } else {
        mean = run_mean[c];
        var = run_var[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      inv_std_[c] = inv;
      const double g = gamma[c], bt = beta[c];
      for (int b = 0; b < B; ++b) {
        const double* p = &x.at(b, c, 0, 0);
        double* ctr = &centered_.at(b, c, 0, 0);
        double* xh = &xhat_.at(b, c, 0, 0);
        double* yo = &y.at(b, c, 0, 0);
        for (int i = 0; i < H * W; ++i) {
          const double d = p[i] - mean;
          ctr[i] = d;
          const double h = d * inv;
          xh[i] = h;
          yo[i] = g * h + bt;
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = gy.dim(0), H = gy.dim(2), W = gy.dim(3);
    Tensor gx(gy.shape());
    const double n = static_cast<double>(n_);
    for (int c = 0; c < ch_; ++c) {
      const double g = gamma[c];
      const double inv = inv_std_[c];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int b = 0; b < B; ++b) {
        const double* gp = &gy.at(b, c, 0, 0);
        const double* xh = &xhat_.at(b, c, 0, 0);
        for (int i = 0; i < H * W; ++i) {
          sum_gy += gp[i];
          sum_gy_xhat += gp[i] * xh[i];
        }
      }
      ggamma[c] += sum_gy_xhat;
      gbeta[c] += sum_gy;
      if (train_) {
        // d/dx of batch normalization with batch statistics
        for (int b = 0; b < B; ++b) {
          const double* gp = &gy.at(b, c, 0, 0);
          const double* xh = &xhat_.at(b, c, 0, 0);
          double* gxo = &gx.at(b, c, 0, 0);
          for (int i = 0; i < H * W; ++i)
            gxo[i] = g * inv * (gp[i] - sum_gy / n - xh[i] * sum_gy_xhat / n);
        }
      } else {
        const double k = g * inv;
        for (int b = 0; b < B; ++b) {
          const double* gp = &gy.at(b, c, 0, 0);
          double* gxo = &gx.at(b, c, 0, 0);
          for (int i = 0; i < H * W; ++i) gxo[i] = k * gp[i];
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggamma});
    out.push_back({prefix + ".beta", &beta, &gbeta});
  }

  Tensor gamma, beta, ggamma, gbeta;
  Tensor run_mean, run_var;  // serialized with the checkpoint, not trained

 private:
  int ch_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
  bool train_ = true;
  int64_t n_ = 0;
  Tensor xhat_, inv_std_, centered_;
};

// ---------------------------------------------------------------------------
class ReLU {
 public:
  Tensor forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (int64_t i = 0; i < y.size(); ++i)
      if (y[i] < 0.0) y[i] = 0.0;
    return y;
  }

  Tensor backward(const Tensor& gy) {
    Tensor gx = gy;
    for (int64_t i = 0; i < gx.size(); ++i)
      if (x_[i] <= 0.0) gx[i] = 0.0;
    return gx;
  }

 private:
  Tensor x_;
};

class Sigmoid {
 public:
  Tensor forward(const Tensor& x) {
    y_ = x;
    for (int64_t i = 0; i < y_.size(); ++i) y_[i] = sigmoid(y_[i]);
    return y_;
  }

  Tensor backward(const Tensor& gy) {
    Tensor gx = gy;
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] *= y_[i] * (1.0 - y_[i]);
    return gx;
  }

 private:
  Tensor y_;
};

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2, floor semantics (an odd trailing row/column is
// dropped). Ties resolve to the first maximum.
class MaxPool2d {
 public:
  Tensor forward(const Tensor& x) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Ho = H / 2, Wo = W / 2;
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("MaxPool2d: input too small");
    in_shape_ = x.shape();
    Tensor y({B, C, Ho, Wo});
    argmax_.assign(static_cast<size_t>(y.size()), 0);
    int64_t oi = 0;
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        const double* p = &x.at(n, c, 0, 0);
        for (int h = 0; h < Ho; ++h)
          for (int w = 0; w < Wo; ++w) {
            const int i00 = (2 * h) * W + 2 * w;
            int best = i00;
            double v = p[i00];
            if (p[i00 + 1] > v) { v = p[i00 + 1]; best = i00 + 1; }
            if (p[i00 + W] > v) { v = p[i00 + W]; best = i00 + W; }
            if (p[i00 + W + 1] > v) { v = p[i00 + W + 1]; best = i00 + W + 1; }
            y[oi] = v;
            argmax_[static_cast<size_t>(oi)] = best;
            ++oi;
          }
      }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    const int Ho = H / 2, Wo = W / 2;
    Tensor gx(in_shape_);
    int64_t oi = 0;
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        double* gp = &gx.at(n, c, 0, 0);
        for (int i = 0; i < Ho * Wo; ++i) {
          gp[argmax_[static_cast<size_t>(oi)]] += gy[oi];
          ++oi;
        }
      }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
  std::vector<int> argmax_;
};

// ---------------------------------------------------------------------------
// Affine map y = x W^T + b on (B, in) inputs; bias optional.
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, bool bias = true)
      : in_(in), out_(out), has_bias_(bias), w({out, in}), gw({out, in}) {
    if (bias) {
      b = Tensor({out});
      gb = Tensor({out});
    }
  }

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }

  Tensor forward(const Tensor& x) {
    if (x.ndim() != 2 || x.dim(1) != in_)
      throw std::invalid_argument("Linear: bad input shape " + x.shape_str());
    x_ = x;
    const int B = x.dim(0);
    Tensor y({B, out_});
    for (int n = 0; n < B; ++n) {
      const double* xp = &x.at(n, 0);
      for (int o = 0; o < out_; ++o) {
        const double* wp = &w.at(o, 0);
        double acc = has_bias_ ? b[o] : 0.0;
        for (int i = 0; i < in_; ++i) acc += wp[i] * xp[i];
        y.at(n, o) = acc;
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = x_.dim(0);
    Tensor gx({B, in_});
    for (int n = 0; n < B; ++n) {
      const double* gp = &gy.at(n, 0);
      const double* xp = &x_.at(n, 0);
      double* gxp = &gx.at(n, 0);
      for (int o = 0; o < out_; ++o) {
        const double g = gp[o];
        const double* wp = &w.at(o, 0);
        double* gwp = &gw.at(o, 0);
        for (int i = 0; i < in_; ++i) {
          gxp[i] += g * wp[i];
          gwp[i] += g * xp[i];
        }
        if (has_bias_) gb[o] += g;
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    if (has_bias_) out.push_back({prefix + ".b", &b, &gb});
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Tensor w, b, gw, gb;

 private:
  int in_ = 0, out_ = 0;
  bool has_bias_ = true;
  Tensor x_;
};

// ---------------------------------------------------------------------------
// Mean over the frequency axis: (B, C, H, W) -> (B, H, C) time-major sequence.
class FreqMean {
 public:
  Tensor forward(const Tensor& x) {
    in_shape_ = x.shape();
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({B, H, C});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h) {
          const double* p = &x.at(n, c, h, 0);
          double acc = 0.0;
          for (int w = 0; w < W; ++w) acc += p[w];
          y.at(n, h, c) = acc / W;
        }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    Tensor gx(in_shape_);
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h) {
          const double g = gy.at(n, h, c) / W;
          double* p = &gx.at(n, c, h, 0);
          for (int w = 0; w < W; ++w) p[w] = g;
        }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

// ---------------------------------------------------------------------------
// Mean over both spatial axes: (B, C, H, W) -> (B, C). This is the SE squeeze.
class SpatialMean {
 public:
  Tensor forward(const Tensor& x) {
    in_shape_ = x.shape();
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({B, C});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        const double* p = &x.at(n, c, 0, 0);
        double acc = 0.0;
        for (int i = 0; i < H * W; ++i) acc += p[i];
        y.at(n, c) = acc / (static_cast<double>(H) * W);
      }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = in_shape_[0], C = in_shape_[1], H = in_shape_[2], W = in_shape_[3];
    Tensor gx(in_shape_);
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        const double g = gy.at(n, c) / (static_cast<double>(H) * W);
        double* p = &gx.at(n, c, 0, 0);
        for (int i = 0; i < H * W; ++i) p[i] = g;
      }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

}  // namespace adff::nn
