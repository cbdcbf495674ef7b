#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "adff/nn.hpp"
#include "adff/tensor.hpp"

namespace adff::nn {

// One LSTM direction. Gate order i, f, g, o; zero initial state. Sequences
// run in increasing step order; the caller reverses time for the backward
// direction of a bidirectional layer.
class LstmDirection {
 public:
  LstmDirection() = default;
  LstmDirection(int input, int hidden)
      : in_(input),
        hid_(hidden),
        w_ih({4 * hidden, input}),
        w_hh({4 * hidden, hidden}),
        b({4 * hidden}),
        gw_ih({4 * hidden, input}),
        gw_hh({4 * hidden, hidden}),
        gb({4 * hidden}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hid_));
    for (int64_t i = 0; i < w_ih.size(); ++i) w_ih[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < w_hh.size(); ++i) w_hh[i] = rng.uniform(-bound, bound);
    for (int64_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }

  // x: (B, T, in) -> (B, T, hid)
  Tensor forward(const Tensor& x) {
    if (x.ndim() != 3 || x.dim(2) != in_)
      throw std::invalid_argument("LstmDirection: bad input shape " + x.shape_str());
    x_ = x;
    const int B = x.dim(0), T = x.dim(1);
    B_ = B;
    T_ = T;
    gates_ = Tensor({T, B, 4 * hid_});  // post-activation i,f,g,o
    cells_ = Tensor({T, B, hid_});
    tanh_c_ = Tensor({T, B, hid_});
    hidden_ = Tensor({T, B, hid_});
    Tensor y({B, T, hid_});
    std::vector<double> a(static_cast<size_t>(4 * hid_));
    for (int t = 0; t < T; ++t) {
      for (int n = 0; n < B; ++n) {
        const double* xt = &x_.at(n, t, 0);
        const double* hprev = (t > 0) ? &hidden_.at(t - 1, n, 0) : nullptr;
        for (int r = 0; r < 4 * hid_; ++r) {
          const double* wi = &w_ih.at(r, 0);
          double acc = b[r];
          for (int i = 0; i < in_; ++i) acc += wi[i] * xt[i];
          if (hprev) {
            const double* wh = &w_hh.at(r, 0);
            for (int i = 0; i < hid_; ++i) acc += wh[i] * hprev[i];
          }
          a[static_cast<size_t>(r)] = acc;
        }
        double* gate = &gates_.at(t, n, 0);
        double* cell = &cells_.at(t, n, 0);
        double* tc = &tanh_c_.at(t, n, 0);
        double* h = &hidden_.at(t, n, 0);
        for (int j = 0; j < hid_; ++j) {
          const double ig = sigmoid(a[static_cast<size_t>(j)]);
          const double fg = sigmoid(a[static_cast<size_t>(hid_ + j)]);
          const double gg = std::tanh(a[static_cast<size_t>(2 * hid_ + j)]);
          const double og = sigmoid(a[static_cast<size_t>(3 * hid_ + j)]);
          const double cprev = (t > 0) ? cells_.at(t - 1, n, j) : 0.0;
          const double c = fg * cprev + ig * gg;
          gate[j] = ig;
          gate[hid_ + j] = fg;
          gate[2 * hid_ + j] = gg;
          gate[3 * hid_ + j] = og;
          cell[j] = c;
          tc[j] = std::tanh(c);
          h[j] = og * tc[j];
          y.at(n, t, j) = h[j];
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& gy) {
    const int B = B_, T = T_;
    Tensor gx({B, T, in_});
    Tensor dh({B, hid_});
    Tensor dc({B, hid_});
    std::vector<double> da(static_cast<size_t>(4 * hid_));
    for (int t = T - 1; t >= 0; --t) {
      for (int n = 0; n < B; ++n) {
        const double* gate = &gates_.at(t, n, 0);
        const double* tc = &tanh_c_.at(t, n, 0);
        for (int j = 0; j < hid_; ++j) {
          const double ig = gate[j], fg = gate[hid_ + j], gg = gate[2 * hid_ + j],
                       og = gate[3 * hid_ + j];
          const double dhj = dh.at(n, j) + gy.at(n, t, j);
          double dcj = dc.at(n, j) + dhj * og * (1.0 - tc[j] * tc[j]);
          const double cprev = (t > 0) ? cells_.at(t - 1, n, j) : 0.0;
          da[static_cast<size_t>(j)] = dcj * gg * ig * (1.0 - ig);               // d pre-act i
          da[static_cast<size_t>(hid_ + j)] = dcj * cprev * fg * (1.0 - fg);     // d pre-act f
          da[static_cast<size_t>(2 * hid_ + j)] = dcj * ig * (1.0 - gg * gg);    // d pre-act g
          da[static_cast<size_t>(3 * hid_ + j)] = dhj * tc[j] * og * (1.0 - og); // d pre-act o
          dc.at(n, j) = dcj * fg;
        }
        const double* xt = &x_.at(n, t, 0);
        const double* hprev = (t > 0) ? &hidden_.at(t - 1, n, 0) : nullptr;
        double* gxt = &gx.at(n, t, 0);
        double* dhn = &dh.at(n, 0);
        for (int j = 0; j < hid_; ++j) dhn[j] = 0.0;
        for (int r = 0; r < 4 * hid_; ++r) {
          const double d = da[static_cast<size_t>(r)];
          gb[r] += d;
          const double* wi = &w_ih.at(r, 0);
          double* gwi = &gw_ih.at(r, 0);
          for (int i = 0; i < in_; ++i) {
            gxt[i] += d * wi[i];
            gwi[i] += d * xt[i];
          }
          const double* wh = &w_hh.at(r, 0);
          double* gwh = &gw_hh.at(r, 0);
          if (hprev) {
            for (int i = 0; i < hid_; ++i) {
              dhn[i] += d * wh[i];
              gwh[i] += d * hprev[i];
            }
          }
        }
      }
    }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w_ih", &w_ih, &gw_ih});
    out.push_back({prefix + ".w_hh", &w_hh, &gw_hh});
    out.push_back({prefix + ".b", &b, &gb});
  }

  Tensor w_ih, w_hh, b, gw_ih, gw_hh, gb;

 private:
  int in_ = 0, hid_ = 0;
  int B_ = 0, T_ = 0;
  Tensor x_, gates_, cells_, tanh_c_, hidden_;
};

inline Tensor reverse_time(const Tensor& x) {
  const int B = x.dim(0), T = x.dim(1), F = x.dim(2);
  Tensor y(x.shape());
  for (int n = 0; n < B; ++n)
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) y.at(n, t, f) = x.at(n, T - 1 - t, f);
  return y;
}

// Stacked bidirectional LSTM. Each layer concatenates the forward pass with
// the time-reversed backward pass, so layer l > 0 consumes 2*hidden features.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(int input, int hidden, int layers) : hid_(hidden) {
    for (int l = 0; l < layers; ++l) {
      const int in = (l == 0) ? input : 2 * hidden;
      fwd_.emplace_back(in, hidden);
      bwd_.emplace_back(in, hidden);
    }
  }

  void init(Rng& rng) {
    for (size_t l = 0; l < fwd_.size(); ++l) {
      fwd_[l].init(rng);
      bwd_[l].init(rng);
    }
  }

  // x: (B, T, input) -> (B, T, 2*hidden)
  Tensor forward(const Tensor& x) {
    Tensor cur = x;
    for (size_t l = 0; l < fwd_.size(); ++l) {
      const Tensor yf = fwd_[l].forward(cur);
      const Tensor yb = reverse_time(bwd_[l].forward(reverse_time(cur)));
      const int B = yf.dim(0), T = yf.dim(1);
      Tensor y({B, T, 2 * hid_});
      for (int n = 0; n < B; ++n)
        for (int t = 0; t < T; ++t) {
          for (int j = 0; j < hid_; ++j) {
            y.at(n, t, j) = yf.at(n, t, j);
            y.at(n, t, hid_ + j) = yb.at(n, t, j);
          }
        }
      cur = std::move(y);
    }
    return cur;
  }

  Tensor backward(const Tensor& gy) {
    Tensor cur = gy;
    for (size_t li = fwd_.size(); li-- > 0;) {
      const int B = cur.dim(0), T = cur.dim(1);
      Tensor gf({B, T, hid_});
      Tensor gb({B, T, hid_});
      for (int n = 0; n < B; ++n)
        for (int t = 0; t < T; ++t)
          for (int j = 0; j < hid_; ++j) {
            gf.at(n, t, j) = cur.at(n, t, j);
            gb.at(n, t, j) = cur.at(n, t, hid_ + j);
          }
      Tensor gx = fwd_[li].backward(gf);
      const Tensor gxb = reverse_time(bwd_[li].backward(reverse_time(gb)));
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += gxb[i];
      cur = std::move(gx);
    }
    return cur;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (size_t l = 0; l < fwd_.size(); ++l) {
      fwd_[l].collect(prefix + ".l" + std::to_string(l) + ".fwd", out);
      bwd_[l].collect(prefix + ".l" + std::to_string(l) + ".bwd", out);
    }
  }

  int hidden() const { return hid_; }

 private:
  int hid_ = 0;
  std::vector<LstmDirection> fwd_, bwd_;
};

}  // namespace adff::nn
