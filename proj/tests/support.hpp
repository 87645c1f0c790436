#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "jaffnet/autograd.hpp"
#include "jaffnet/image.hpp"
#include "jaffnet/layers.hpp"
#include "jaffnet/ops.hpp"

namespace jaffnet::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

inline Tensor<double> random_binary(const Shape& shape, Rng& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = coin(rng) ? 1.0 : 0.0;
  return t;
}

struct GradCheckResult {
  double max_relative_error = 0;
  std::string worst;
  int checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps vanishing
/// gradients from producing meaningless ratios.
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares backprop gradients of a scalar loss against central finite
/// differences for up to `per_tensor` randomly chosen elements of each input.
inline GradCheckResult check_gradients(const std::function<Var<double>()>& loss,
                                       std::vector<std::pair<std::string, Var<double>>> wrt, int per_tensor = 16,
                                       std::uint64_t seed = 1, double h = 1e-6) {
  for (auto& [name, v] : wrt) v.zero_grad();
  backward(loss());
  GradCheckResult r;
  Rng rng(seed);
  for (auto& [name, v] : wrt) {
    const std::size_t n = v.value().size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(n, static_cast<std::size_t>(per_tensor)));
    const Tensor<double> grad = v.grad().size() == n ? v.grad() : Tensor<double>(v.shape());
    for (std::size_t i : idx) {
      const double orig = v.value()[i];
      v.mutable_value()[i] = orig + h;
      const double fp = loss().value()[0];
      v.mutable_value()[i] = orig - h;
      const double fm = loss().value()[0];
      v.mutable_value()[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double err = relative_error(grad[i], numeric);
      ++r.checked;
      if (err > r.max_relative_error) {
        r.max_relative_error = err;
        r.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(grad[i]) + " numeric " +
                  std::to_string(numeric);
      }
    }
  }
  return r;
}

/// Learnable entries of a parameter set as gradient-check inputs.
template <typename Params>
std::vector<std::pair<std::string, Var<double>>> learnable(const Params& params) {
  std::vector<std::pair<std::string, Var<double>>> out;
  for (const auto& e : params.parameters()) out.emplace_back(e.name, e.var);
  return out;
}

/// Straightforward convolution by direct summation.
template <typename T>
Tensor<T> naive_conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias, int stride, int pad,
                       int dilation) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  const int k = ws.h;
  const int oh = (xs.h + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  const int ow = (xs.w + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
  Tensor<T> out(Shape{xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias ? static_cast<double>((*bias)[o]) : 0.0;
          for (int c = 0; c < xs.c; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride - pad + ky * dilation;
                const int ix = xx * stride - pad + kx * dilation;
                if (iy < 0 || ix < 0 || iy >= xs.h || ix >= xs.w) continue;
                acc += static_cast<double>(w.at(o, c, ky, kx)) * x.at(n, c, iy, ix);
              }
          out.at(n, o, y, xx) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

/// Random saliency map rounded to 8-bit levels half the time, which exercises
/// exact threshold hits.
inline SaliencyMap random_saliency(int h, int w, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool quantized = std::bernoulli_distribution(0.5)(rng);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = quantized ? std::round(u(rng) * 255.0) / 255.0 : u(rng);
  return SaliencyMap(h, w, std::move(v));
}

inline GroundTruthMask random_mask(int h, int w, Rng& rng, double p = 0.3) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(h) * w);
  for (auto& x : v) x = coin(rng) ? 1 : 0;
  return GroundTruthMask(h, w, std::move(v));
}

}  // namespace jaffnet::testing
