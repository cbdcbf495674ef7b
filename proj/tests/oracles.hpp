#pragma once

// Independent reference implementations used only by the tests. Nothing here
// may call into the code paths it is checking.

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "adff/rng.hpp"
#include "adff/tensor.hpp"

namespace oracle {

// O(n^2) discrete Fourier transform, one-sided power spectrum.
inline std::vector<double> dft_power(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<double> power(n / 2 + 1);
  for (size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double phi = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                         static_cast<double>(n);
      re += x[i] * std::cos(phi);
      im += x[i] * std::sin(phi);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

// Brute-force double-loop spatial mean of one channel.
inline double brute_mean(const adff::Tensor& s, int n, int c) {
  const int H = s.dim(2), W = s.dim(3);
  double acc = 0.0;
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) acc += s.at(n, c, i, j);
  return acc / (static_cast<double>(H) * W);
}

// Central-difference gradient check. `loss` must recompute the full forward
// pass from the current contents of the tensors it captures. Checks up to
// `max_coords` coordinates of `x` (all of them when the tensor is small)
// against `analytic`, returning the worst relative error.
inline double max_grad_error(adff::Tensor& x, const adff::Tensor& analytic,
                             const std::function<double()>& loss, adff::Rng& rng,
                             int max_coords = 64) {
  const int64_t n = x.size();
  std::vector<int64_t> coords;
  if (n <= max_coords) {
    for (int64_t i = 0; i < n; ++i) coords.push_back(i);
  } else {
    for (int k = 0; k < max_coords; ++k)
      coords.push_back(static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(n)));
  }
  double worst = 0.0;
  for (int64_t i : coords) {
    const double saved = x[i];
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(fd - a) / std::max({1.0, std::abs(fd), std::abs(a)});
    worst = std::max(worst, err);
  }
  return worst;
}

// Scalar Adam recurrence for a constant gradient, run independently of the
// production optimizer.
inline double adam_scalar_update(double param, double g, int steps, double lr,
                                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= steps; ++t) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, t));
    const double vhat = v / (1.0 - std::pow(beta2, t));
    param -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  return param;
}

inline adff::Tensor random_tensor(std::vector<int> shape, adff::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  adff::Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace oracle
