#include "jaffnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "jaffnet/errors.hpp"
#include "jaffnet/network.hpp"

namespace jaffnet {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_same(const Shape& p, const Shape& g, const char* what) {
  if (p != g) throw ShapeError(std::string(what) + ": prediction " + p.str() + " vs target " + g.str());
}

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// Separable Gaussian filtering of one H x W plane with reflection padding.
class SeparableWindow {
 public:
  SeparableWindow(const SsimConfig& config, int height, int width)
      : taps_(config.taps()), radius_(config.window / 2), height_(height), width_(width) {}

  void filter(const std::vector<double>& src, std::vector<double>& dst) const {
    tmp_.assign(src.size(), 0.0);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        double acc = 0;
        for (int k = -radius_; k <= radius_; ++k) acc += taps_[k + radius_] * src[idx(r, reflect(c + k, width_))];
        tmp_[idx(r, c)] = acc;
      }
    }
    dst.assign(src.size(), 0.0);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        double acc = 0;
        for (int k = -radius_; k <= radius_; ++k) acc += taps_[k + radius_] * tmp_[idx(reflect(r + k, height_), c)];
        dst[idx(r, c)] = acc;
      }
    }
  }

  // Adjoint of filter(): scatters each output back onto the inputs that fed it.
  void adjoint(const std::vector<double>& src, std::vector<double>& dst) const {
    tmp_.assign(src.size(), 0.0);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        const double v = src[idx(r, c)];
        for (int k = -radius_; k <= radius_; ++k) tmp_[idx(reflect(r + k, height_), c)] += taps_[k + radius_] * v;
      }
    }
    dst.assign(src.size(), 0.0);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        const double v = tmp_[idx(r, c)];
        for (int k = -radius_; k <= radius_; ++k) dst[idx(r, reflect(c + k, width_))] += taps_[k + radius_] * v;
      }
    }
  }

 private:
  [[nodiscard]] std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * width_ + c; }

  std::vector<double> taps_;
  int radius_;
  int height_;
  int width_;
  mutable std::vector<double> tmp_;
};

struct SsimPlane {
  double mean_ssim = 0;
  // Per-pixel partial derivatives of the SSIM index w.r.t. the window
  // statistics mu_x, E[x^2], E[xy].
  std::vector<double> d_mu, d_exx, d_exy;
};

SsimPlane ssim_plane(const SeparableWindow& window, const std::vector<double>& x, const std::vector<double>& y,
                     bool with_grad) {
  const std::size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mx, my, exx, eyy, exy;
  window.filter(x, mx);
  window.filter(y, my);
  window.filter(xx, exx);
  window.filter(yy, eyy);
  window.filter(xy, exy);

  constexpr double c1 = SsimConfig::kEps1;
  constexpr double c2 = SsimConfig::kEps2;
  SsimPlane out;
  if (with_grad) {
    out.d_mu.resize(n);
    out.d_exx.resize(n);
    out.d_exy.resize(n);
  }
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a1 = 2 * mx[i] * my[i] + c1;
    const double a2 = 2 * (exy[i] - mx[i] * my[i]) + c2;
    const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
    const double b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + c2;
    const double s = (a1 * a2) / (b1 * b2);
    total += s;
    if (with_grad) {
      const double inv = 1.0 / (b1 * b2);
      out.d_mu[i] = 2 * my[i] * a2 * inv - 2 * my[i] * a1 * inv - 2 * mx[i] * s / b1 + 2 * mx[i] * s / b2;
      out.d_exx[i] = -s / b2;
      out.d_exy[i] = 2 * a1 * inv;
    }
  }
  out.mean_ssim = total / static_cast<double>(n);
  return out;
}

}  // namespace

void SsimConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ConfigError("ssim window must be odd and >= 3");
  if (!(sigma > 0)) throw ConfigError("ssim sigma must be positive");
}

std::vector<double> SsimConfig::taps() const {
  std::vector<double> g(window);
  const int r = window / 2;
  double s = 0;
  for (int i = 0; i < window; ++i) {
    g[i] = std::exp(-static_cast<double>((i - r) * (i - r)) / (2 * sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

LossOptions LossOptions::from(const RunConfig& config) {
  LossOptions o;
  o.bce = config.training.loss_bce;
  o.iou = config.training.loss_iou;
  o.ssim = config.training.loss_ssim;
  o.deep_supervision = config.training.deep_supervision;
  o.ssim_config.window = config.network.ssim_window;
  o.ssim_config.sigma = config.network.ssim_sigma;
  return o;
}

template <typename T>
Var<T> bce_loss(const Var<T>& prediction, const Tensor<T>& target) {
  require_same(prediction.shape(), target.shape(), "bce_loss");
  const auto& p = prediction.value();
  const std::size_t n = p.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), kBceClamp, 1.0 - kBceClamp);
    const double g = target[i];
    acc -= g * std::log(pc) + (1 - g) * std::log(1 - pc);
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / n));
  return Var<T>::make(std::move(out), {prediction}, [target](Node<T>& self) {
    Node<T>& pn = *self.inputs[0];
    auto& grad = pn.grad_buffer();
    const double scale = self.grad[0] / static_cast<double>(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double pc = std::clamp(static_cast<double>(pn.value[i]), kBceClamp, 1.0 - kBceClamp);
      const double g = target[i];
      grad[i] += static_cast<T>(scale * (pc - g) / (pc * (1 - pc)));
    }
  });
}

template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target) {
  require_same(logits.shape(), target.shape(), "bce_with_logits");
  const auto& z = logits.value();
  const std::size_t n = z.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pc = std::clamp(stable_sigmoid(static_cast<double>(z[i])), kBceClamp, 1.0 - kBceClamp);
    const double g = target[i];
    acc -= g * std::log(pc) + (1 - g) * std::log(1 - pc);
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / n));
  return Var<T>::make(std::move(out), {logits}, [target](Node<T>& self) {
    Node<T>& zn = *self.inputs[0];
    auto& grad = zn.grad_buffer();
    const double scale = self.grad[0] / static_cast<double>(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] += static_cast<T>(scale * (stable_sigmoid(static_cast<double>(zn.value[i])) - target[i]));
    }
  });
}

template <typename T>
Var<T> iou_loss(const Var<T>& prediction, const Tensor<T>& target) {
  require_same(prediction.shape(), target.shape(), "iou_loss");
  const Shape s = prediction.shape();
  const std::size_t per = s.numel() / s.n;
  std::vector<double> inter(s.n), uni(s.n);
  double acc = 0;
  for (int n = 0; n < s.n; ++n) {
    const T* p = prediction.value().data() + n * per;
    const T* g = target.data() + n * per;
    double i_sum = 0, u_sum = 0;
    for (std::size_t k = 0; k < per; ++k) {
      i_sum += static_cast<double>(p[k]) * g[k];
      u_sum += static_cast<double>(p[k]) + g[k] - static_cast<double>(p[k]) * g[k];
    }
    inter[n] = i_sum;
    uni[n] = u_sum;
    acc += u_sum > 0 ? 1.0 - i_sum / u_sum : 0.0;
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / s.n));
  return Var<T>::make(std::move(out), {prediction},
                      [target, s, per, inter = std::move(inter), uni = std::move(uni)](Node<T>& self) {
                        auto& grad = self.inputs[0]->grad_buffer();
                        const double scale = self.grad[0] / s.n;
                        for (int n = 0; n < s.n; ++n) {
                          if (!(uni[n] > 0)) continue;
                          const double u2 = uni[n] * uni[n];
                          const T* g = target.data() + n * per;
                          T* d = grad.data() + n * per;
                          for (std::size_t k = 0; k < per; ++k) {
                            d[k] += static_cast<T>(-scale * (g[k] * uni[n] - inter[n] * (1 - g[k])) / u2);
                          }
                        }
                      });
}

template <typename T>
Var<T> ssim_loss(const Var<T>& prediction, const Tensor<T>& target, const SsimConfig& config) {
  require_same(prediction.shape(), target.shape(), "ssim_loss");
  config.validate();
  const Shape s = prediction.shape();
  if (s.h < config.window || s.w < config.window) {
    throw ConfigError("ssim_loss: image " + std::to_string(s.h) + "x" + std::to_string(s.w) + " smaller than window " +
                      std::to_string(config.window));
  }
  const SeparableWindow window(config, s.h, s.w);
  const int planes = s.n * s.c;
  const std::size_t plane = s.plane();
  const bool with_grad = GradMode::enabled() && prediction.requires_grad();

  std::vector<SsimPlane> stats(planes);
  double acc = 0;
  for (int k = 0; k < planes; ++k) {
    std::vector<double> x(prediction.value().data() + k * plane, prediction.value().data() + (k + 1) * plane);
    std::vector<double> y(target.data() + k * plane, target.data() + (k + 1) * plane);
    stats[k] = ssim_plane(window, x, y, with_grad);
    acc += 1.0 - stats[k].mean_ssim;
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(acc / planes));
  return Var<T>::make(std::move(out), {prediction},
                      [target, window, planes, plane, stats = std::move(stats)](Node<T>& self) {
                        Node<T>& pn = *self.inputs[0];
                        auto& grad = pn.grad_buffer();
                        // dL/dS_p for every window centre p.
                        const double upstream = -self.grad[0] / (static_cast<double>(planes) * plane);
                        std::vector<double> a(plane), b(plane), c(plane), ta, tb, tc;
                        for (int k = 0; k < planes; ++k) {
                          const auto& st = stats[k];
                          for (std::size_t i = 0; i < plane; ++i) {
                            a[i] = upstream * st.d_mu[i];
                            b[i] = upstream * st.d_exx[i];
                            c[i] = upstream * st.d_exy[i];
                          }
                          window.adjoint(a, ta);
                          window.adjoint(b, tb);
                          window.adjoint(c, tc);
                          const T* x = pn.value.data() + k * plane;
                          const T* y = target.data() + k * plane;
                          T* d = grad.data() + k * plane;
                          for (std::size_t i = 0; i < plane; ++i) {
                            d[i] += static_cast<T>(ta[i] + 2.0 * x[i] * tb[i] + y[i] * tc[i]);
                          }
                        }
                      });
}

template <typename T>
LossResult<T> total_loss(std::span<const Var<T>> side_outputs, const Tensor<T>& target, const LossOptions& options) {
  return total_loss<T>(side_outputs, std::span<const Var<T>>(), target, options);
}

template <typename T>
LossResult<T> total_loss(std::span<const Var<T>> side_outputs, std::span<const Var<T>> side_logits,
                         const Tensor<T>& target, const LossOptions& options) {
  if (side_outputs.size() != static_cast<std::size_t>(kSideOutputs)) {
    throw ConfigError("total_loss expects " + std::to_string(kSideOutputs) + " side outputs, got " +
                      std::to_string(side_outputs.size()));
  }
  if (!side_logits.empty() && side_logits.size() != side_outputs.size()) {
    throw ConfigError("total_loss expects one logit map per side output");
  }
  LossResult<T> r;
  Var<T> total;
  auto accumulate = [&total](const Var<T>& term) { total = total.defined() ? ops::add(total, term) : term; };
  for (int k = 0; k < kSideOutputs; ++k) {
    const Var<T>& p = side_outputs[k];
    const bool contributes = options.deep_supervision || k == kSideOutputs - 1;
    r.breakdown.contributes[k] = contributes;
    // Terms that do not contribute are still evaluated for the log, without a graph.
    std::optional<NoGradGuard> guard;
    if (!contributes) guard.emplace();
    const Var<T> bce = side_logits.empty() ? bce_loss(p, target) : bce_with_logits(side_logits[k], target);
    const Var<T> iou = iou_loss(p, target);
    const Var<T> ssim = ssim_loss(p, target, options.ssim_config);
    auto& terms = r.breakdown.per_output[k];
    terms.bce = bce.value()[0];
    terms.iou = iou.value()[0];
    terms.ssim = ssim.value()[0];
    if (!contributes) continue;
    if (options.bce) {
      accumulate(bce);
      r.breakdown.total += terms.bce;
    }
    if (options.iou) {
      accumulate(iou);
      r.breakdown.total += terms.iou;
    }
    if (options.ssim) {
      accumulate(ssim);
      r.breakdown.total += terms.ssim;
    }
  }
  r.total = total;
  return r;
}

template <typename T>
LossResult<T> total_loss(const NetworkOutput<T>& output, const Tensor<T>& target, const LossOptions& options) {
  return total_loss<T>(std::span<const Var<T>>(output.side_outputs), std::span<const Var<T>>(output.side_logits), target,
                       options);
}

#define JAFFNET_INSTANTIATE_LOSSES(T)                                                                  \
  template Var<T> bce_loss(const Var<T>&, const Tensor<T>&);                                           \
  template Var<T> bce_with_logits(const Var<T>&, const Tensor<T>&);                                    \
  template Var<T> iou_loss(const Var<T>&, const Tensor<T>&);                                           \
  template Var<T> ssim_loss(const Var<T>&, const Tensor<T>&, const SsimConfig&);                       \
  template LossResult<T> total_loss(std::span<const Var<T>>, const Tensor<T>&, const LossOptions&);    \
  template LossResult<T> total_loss(std::span<const Var<T>>, std::span<const Var<T>>, const Tensor<T>&,       \
                                    const LossOptions&);                                                 \
  template LossResult<T> total_loss(const NetworkOutput<T>&, const Tensor<T>&, const LossOptions&);

JAFFNET_INSTANTIATE_LOSSES(float)
JAFFNET_INSTANTIATE_LOSSES(double)

}  // namespace jaffnet
