#include "jaffnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "jaffnet/errors.hpp"

namespace jaffnet::ops {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void require_same(const Shape& a, const Shape& b, const char* op) {
  require(a == b, std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

struct ConvPlan {
  int in_c, kernel, in_h, in_w, out_h, out_w, batch;
  ConvGeometry g;
  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(in_c) * kernel * kernel; }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(batch) * out_h * out_w; }
};

// col[(ci*k*k + ki*k + kj), n*P + p]
template <typename T>
void im2col(const T* x, const ConvPlan& p, T* col) {
  const std::size_t plane_out = static_cast<std::size_t>(p.out_h) * p.out_w;
  const std::size_t ncols = p.cols();
  for (int ci = 0; ci < p.in_c; ++ci) {
    for (int ki = 0; ki < p.kernel; ++ki) {
      for (int kj = 0; kj < p.kernel; ++kj) {
        T* row = col + ((static_cast<std::size_t>(ci) * p.kernel + ki) * p.kernel + kj) * ncols;
        const int dh = ki * p.g.dilation - p.g.padding;
        const int dw = kj * p.g.dilation - p.g.padding;
        for (int n = 0; n < p.batch; ++n) {
          const T* src = x + (static_cast<std::size_t>(n) * p.in_c + ci) * p.in_h * p.in_w;
          T* dst = row + n * plane_out;
          for (int oh = 0; oh < p.out_h; ++oh) {
            const int ih = oh * p.g.stride + dh;
            T* out_row = dst + static_cast<std::size_t>(oh) * p.out_w;
            if (ih < 0 || ih >= p.in_h) {
              std::fill(out_row, out_row + p.out_w, T(0));
              continue;
            }
            const T* in_row = src + static_cast<std::size_t>(ih) * p.in_w;
            if (p.g.stride == 1) {
              const int lo = std::clamp(-dw, 0, p.out_w);
              const int hi = std::clamp(p.in_w - dw, lo, p.out_w);
              std::fill(out_row, out_row + lo, T(0));
              std::copy(in_row + lo + dw, in_row + hi + dw, out_row + lo);
              std::fill(out_row + hi, out_row + p.out_w, T(0));
            } else {
              for (int ow = 0; ow < p.out_w; ++ow) {
                const int iw = ow * p.g.stride + dw;
                out_row[ow] = (iw >= 0 && iw < p.in_w) ? in_row[iw] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvPlan& p, T* dx) {
  const std::size_t plane_out = static_cast<std::size_t>(p.out_h) * p.out_w;
  const std::size_t ncols = p.cols();
  for (int ci = 0; ci < p.in_c; ++ci) {
    for (int ki = 0; ki < p.kernel; ++ki) {
      for (int kj = 0; kj < p.kernel; ++kj) {
        const T* row = col + ((static_cast<std::size_t>(ci) * p.kernel + ki) * p.kernel + kj) * ncols;
        const int dh = ki * p.g.dilation - p.g.padding;
        const int dw = kj * p.g.dilation - p.g.padding;
        for (int n = 0; n < p.batch; ++n) {
          T* dst = dx + (static_cast<std::size_t>(n) * p.in_c + ci) * p.in_h * p.in_w;
          const T* src = row + n * plane_out;
          for (int oh = 0; oh < p.out_h; ++oh) {
            const int ih = oh * p.g.stride + dh;
            if (ih < 0 || ih >= p.in_h) continue;
            const T* g_row = src + static_cast<std::size_t>(oh) * p.out_w;
            T* in_row = dst + static_cast<std::size_t>(ih) * p.in_w;
            for (int ow = 0; ow < p.out_w; ++ow) {
              const int iw = ow * p.g.stride + dw;
              if (iw >= 0 && iw < p.in_w) in_row[iw] += g_row[ow];
            }
          }
        }
      }
    }
  }
}

struct Bilinear {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

Bilinear bilinear_axis(int in, int out) {
  Bilinear b;
  b.lo.resize(out);
  b.hi.resize(out);
  b.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(src);
    if (i0 > in - 1) i0 = in - 1;
    b.lo[o] = i0;
    b.hi[o] = i0 < in - 1 ? i0 + 1 : i0;
    b.frac[o] = src - i0;
  }
  return b;
}

}  // namespace

int conv_output_extent(int input, int kernel, const ConvGeometry& g) {
  return (input + 2 * g.padding - g.dilation * (kernel - 1) - 1) / g.stride + 1;
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geometry) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.c == xs.c, "conv2d: weight expects " + std::to_string(ws.c) + " input channels, got " + xs.str());
  require(ws.h == ws.w, "conv2d: square kernels only, got " + ws.str());
  ConvPlan plan{xs.c, ws.h, xs.h, xs.w, conv_output_extent(xs.h, ws.h, geometry),
                conv_output_extent(xs.w, ws.w, geometry), xs.n, geometry};
  require(plan.out_h > 0 && plan.out_w > 0, "conv2d: input " + xs.str() + " too small for kernel");
  if (bias.defined()) require(bias.value().size() == static_cast<std::size_t>(ws.n), "conv2d: bias size");

  const int out_c = ws.n;
  const std::size_t nrows = plan.rows();
  const std::size_t ncols = plan.cols();
  const std::size_t plane_out = static_cast<std::size_t>(plan.out_h) * plan.out_w;

  std::vector<T> col(nrows * ncols);
  im2col(x.value().data(), plan, col.data());
  Eigen::Map<const RowMatrix<T>> wm(weight.value().data(), out_c, static_cast<Eigen::Index>(nrows));
  Eigen::Map<const RowMatrix<T>> cm(col.data(), static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
  RowMatrix<T> om = wm * cm;

  Tensor<T> out(Shape{xs.n, out_c, plan.out_h, plan.out_w});
  for (int n = 0; n < xs.n; ++n) {
    for (int co = 0; co < out_c; ++co) {
      const T b = bias.defined() ? bias.value()[co] : T(0);
      const T* src = om.data() + static_cast<std::size_t>(co) * ncols + n * plane_out;
      T* dst = out.plane(n, co);
      for (std::size_t p = 0; p < plane_out; ++p) dst[p] = src[p] + b;
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Var<T>::make(std::move(out), std::move(inputs), [plan, out_c, nrows, ncols, plane_out](Node<T>& self) {
    Node<T>& xn = *self.inputs[0];
    Node<T>& wn = *self.inputs[1];
    Node<T>* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const Tensor<T>& gout = self.grad;

    RowMatrix<T> gm(out_c, static_cast<Eigen::Index>(ncols));
    for (int n = 0; n < plan.batch; ++n) {
      for (int co = 0; co < out_c; ++co) {
        std::copy_n(gout.plane(n, co), plane_out, gm.data() + static_cast<std::size_t>(co) * ncols + n * plane_out);
      }
    }
    if (bn && bn->requires_grad) {
      auto& gb = bn->grad_buffer();
      for (int co = 0; co < out_c; ++co) gb[co] += gm.row(co).sum();
    }
    const bool need_w = wn.requires_grad;
    const bool need_x = xn.requires_grad;
    if (!need_w && !need_x) return;

    std::vector<T> col(nrows * ncols);
    Eigen::Map<RowMatrix<T>> cm(col.data(), static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
    if (need_w) {
      im2col(xn.value.data(), plan, col.data());
      Eigen::Map<RowMatrix<T>> gw(wn.grad_buffer().data(), out_c, static_cast<Eigen::Index>(nrows));
      gw.noalias() += gm * cm.transpose();
    }
    if (need_x) {
      Eigen::Map<const RowMatrix<T>> wm(wn.value.data(), out_c, static_cast<Eigen::Index>(nrows));
      cm.noalias() = wm.transpose() * gm;
      col2im(col.data(), plan, xn.grad_buffer().data());
    }
  });
}

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geometry) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  require(ws.n == xs.c && ws.c == 1 && ws.h == ws.w,
          "depthwise_conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  const int k = ws.h;
  const int oh_n = conv_output_extent(xs.h, k, geometry);
  const int ow_n = conv_output_extent(xs.w, k, geometry);
  require(oh_n > 0 && ow_n > 0, "depthwise_conv2d: input too small");
  const ConvGeometry g = geometry;

  Tensor<T> out(Shape{xs.n, xs.c, oh_n, ow_n});
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = weight.value();
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* src = xv.plane(n, c);
      const T* kw = wv.plane(c, 0);
      T* dst = out.plane(n, c);
      const T b = bias.defined() ? bias.value()[c] : T(0);
      for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
          T acc = b;
          for (int ki = 0; ki < k; ++ki) {
            const int ih = oh * g.stride - g.padding + ki * g.dilation;
            if (ih < 0 || ih >= xs.h) continue;
            for (int kj = 0; kj < k; ++kj) {
              const int iw = ow * g.stride - g.padding + kj * g.dilation;
              if (iw < 0 || iw >= xs.w) continue;
              acc += kw[ki * k + kj] * src[ih * xs.w + iw];
            }
          }
          dst[oh * ow_n + ow] = acc;
        }
      }
    }
  }

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Var<T>::make(std::move(out), std::move(inputs), [xs, k, oh_n, ow_n, g](Node<T>& self) {
    Node<T>& xn = *self.inputs[0];
    Node<T>& wn = *self.inputs[1];
    Node<T>* bn = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    const Tensor<T>& gout = self.grad;
    T* gx = xn.requires_grad ? xn.grad_buffer().data() : nullptr;
    T* gw = wn.requires_grad ? wn.grad_buffer().data() : nullptr;
    T* gb = (bn && bn->requires_grad) ? bn->grad_buffer().data() : nullptr;
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T* src = xn.value.plane(n, c);
        const T* kw = wn.value.plane(c, 0);
        const T* go = gout.plane(n, c);
        const std::size_t xoff = (static_cast<std::size_t>(n) * xs.c + c) * xs.plane();
        for (int oh = 0; oh < oh_n; ++oh) {
          for (int ow = 0; ow < ow_n; ++ow) {
            const T gv = go[oh * ow_n + ow];
            if (gb) gb[c] += gv;
            for (int ki = 0; ki < k; ++ki) {
              const int ih = oh * g.stride - g.padding + ki * g.dilation;
              if (ih < 0 || ih >= xs.h) continue;
              for (int kj = 0; kj < k; ++kj) {
                const int iw = ow * g.stride - g.padding + kj * g.dilation;
                if (iw < 0 || iw >= xs.w) continue;
                if (gw) gw[c * k * k + ki * k + kj] += gv * src[ih * xs.w + iw];
                if (gx) gx[xoff + ih * xs.w + iw] += gv * kw[ki * k + kj];
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps) {
  const Shape xs = x.shape();
  const auto channels = static_cast<std::size_t>(xs.c);
  require(gamma.value().size() == channels && beta.value().size() == channels &&
              running_mean.size() == channels && running_var.size() == channels,
          "batch_norm: parameter size does not match " + xs.str());
  const std::size_t plane = xs.plane();
  const double count = static_cast<double>(xs.n) * plane;

  std::vector<T> mean(channels), inv_std(channels);
  const Tensor<T>& xv = x.value();
  for (int c = 0; c < xs.c; ++c) {
    if (training) {
      double s = 0;
      for (int n = 0; n < xs.n; ++n) {
        const T* p = xv.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / count;
      double v = 0;
      for (int n = 0; n < xs.n; ++n) {
        const T* p = xv.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= count;
      mean[c] = static_cast<T>(m);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(v + eps));
      const double unbiased = count > 1 ? v * count / (count - 1) : v;
      running_mean[c] = static_cast<T>((1 - momentum) * running_mean[c] + momentum * m);
      running_var[c] = static_cast<T>((1 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean[c] = running_mean[c];
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
    }
  }

  Tensor<T> out(xs);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = xv.plane(n, c);
      T* o = out.plane(n, c);
      const T a = gamma.value()[c] * inv_std[c];
      const T b = beta.value()[c] - a * mean[c];
      for (std::size_t i = 0; i < plane; ++i) o[i] = a * p[i] + b;
    }
  }

  return Var<T>::make(std::move(out), {x, gamma, beta},
                      [xs, plane, count, training, mean = std::move(mean), inv_std = std::move(inv_std)](Node<T>& self) {
                        Node<T>& xn = *self.inputs[0];
                        Node<T>& gn = *self.inputs[1];
                        Node<T>& bn = *self.inputs[2];
                        const Tensor<T>& gout = self.grad;
                        for (int c = 0; c < xs.c; ++c) {
                          double sum_g = 0, sum_gx = 0;
                          for (int n = 0; n < xs.n; ++n) {
                            const T* p = xn.value.plane(n, c);
                            const T* g = gout.plane(n, c);
                            for (std::size_t i = 0; i < plane; ++i) {
                              sum_g += g[i];
                              sum_gx += g[i] * (p[i] - mean[c]) * inv_std[c];
                            }
                          }
                          if (gn.requires_grad) gn.grad_buffer()[c] += static_cast<T>(sum_gx);
                          if (bn.requires_grad) bn.grad_buffer()[c] += static_cast<T>(sum_g);
                          if (!xn.requires_grad) continue;
                          const T gamma_c = gn.value[c];
                          Tensor<T>& gx = xn.grad_buffer();
                          for (int n = 0; n < xs.n; ++n) {
                            const T* p = xn.value.plane(n, c);
                            const T* g = gout.plane(n, c);
                            T* d = gx.plane(n, c);
                            if (training) {
                              const double mg = sum_g / count;
                              const double mgx = sum_gx / count;
                              for (std::size_t i = 0; i < plane; ++i) {
                                const double xhat = (p[i] - mean[c]) * inv_std[c];
                                d[i] += static_cast<T>(gamma_c * inv_std[c] * (g[i] - mg - xhat * mgx));
                              }
                            } else {
                              for (std::size_t i = 0; i < plane; ++i) d[i] += gamma_c * inv_std[c] * g[i];
                            }
                          }
                        }
                      });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x.value());
  for (auto& v : out.values()) v = v > T(0) ? v : T(0);
  return Var<T>::make(std::move(out), {x}, [](Node<T>& self) {
    Node<T>& xn = *self.inputs[0];
    auto& gx = xn.grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xn.value[i] > T(0)) gx[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out(x.value());
  for (auto& v : out.values()) {
    if (v >= T(0)) {
      v = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      v = e / (T(1) + e);
    }
  }
  return Var<T>::make(std::move(out), {x}, [](Node<T>& self) {
    auto& gx = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const T y = self.value[i];
      gx[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.value());
  out += b.value();
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->grad_buffer() += self.grad;
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& an = *self.inputs[0];
    Node<T>& bn = *self.inputs[1];
    if (an.requires_grad) {
      auto& g = an.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      auto& g = bn.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an.value[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, const Var<T>& alpha) {
  require(alpha.value().size() == 1, "scale: alpha must have one element");
  const T a = alpha.value()[0];
  Tensor<T> out(x.value());
  out *= a;
  return Var<T>::make(std::move(out), {x, alpha}, [](Node<T>& self) {
    Node<T>& xn = *self.inputs[0];
    Node<T>& an = *self.inputs[1];
    if (xn.requires_grad) {
      auto& g = xn.grad_buffer();
      const T a = an.value[0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += a * self.grad[i];
    }
    if (an.requires_grad) {
      double s = 0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) s += self.grad[i] * xn.value[i];
      an.grad_buffer()[0] += static_cast<T>(s);
    }
  });
}

template <typename T>
Var<T> outer_product(const Var<T>& channel, const Var<T>& spatial) {
  const Shape cs = channel.shape();
  const Shape ss = spatial.shape();
  require(cs.h == 1 && cs.w == 1 && ss.c == 1 && cs.n == ss.n,
          "outer_product: expects [N,C,1,1] and [N,1,H,W], got " + cs.str() + " and " + ss.str());
  Tensor<T> out(Shape{cs.n, cs.c, ss.h, ss.w});
  const std::size_t plane = ss.plane();
  for (int n = 0; n < cs.n; ++n) {
    const T* s = spatial.value().plane(n, 0);
    for (int c = 0; c < cs.c; ++c) {
      const T m = channel.value().at(n, c, 0, 0);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) o[i] = m * s[i];
    }
  }
  return Var<T>::make(std::move(out), {channel, spatial}, [cs, plane](Node<T>& self) {
    Node<T>& cn = *self.inputs[0];
    Node<T>& sn = *self.inputs[1];
    for (int n = 0; n < cs.n; ++n) {
      const T* s = sn.value.plane(n, 0);
      for (int c = 0; c < cs.c; ++c) {
        const T* g = self.grad.plane(n, c);
        if (cn.requires_grad) {
          double acc = 0;
          for (std::size_t i = 0; i < plane; ++i) acc += g[i] * s[i];
          cn.grad_buffer().at(n, c, 0, 0) += static_cast<T>(acc);
        }
        if (sn.requires_grad) {
          const T m = cn.value.at(n, c, 0, 0);
          T* gs = sn.grad_buffer().plane(n, 0);
          for (std::size_t i = 0; i < plane; ++i) gs[i] += g[i] * m;
        }
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  require(as.n == bs.n && as.h == bs.h && as.w == bs.w,
          "concat_channels: incompatible " + as.str() + " and " + bs.str());
  Tensor<T> out(Shape{as.n, as.c + bs.c, as.h, as.w});
  const std::size_t plane = as.plane();
  for (int n = 0; n < as.n; ++n) {
    std::copy_n(a.value().plane(n, 0), as.c * plane, out.plane(n, 0));
    std::copy_n(b.value().plane(n, 0), bs.c * plane, out.plane(n, as.c));
  }
  return Var<T>::make(std::move(out), {a, b}, [as, bs, plane](Node<T>& self) {
    Node<T>& an = *self.inputs[0];
    Node<T>& bn = *self.inputs[1];
    for (int n = 0; n < as.n; ++n) {
      if (an.requires_grad) {
        const T* g = self.grad.plane(n, 0);
        T* d = an.grad_buffer().plane(n, 0);
        for (std::size_t i = 0; i < as.c * plane; ++i) d[i] += g[i];
      }
      if (bn.requires_grad) {
        const T* g = self.grad.plane(n, as.c);
        T* d = bn.grad_buffer().plane(n, 0);
        for (std::size_t i = 0; i < bs.c * plane; ++i) d[i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> max_pool2x2(const Var<T>& x) {
  const Shape xs = x.shape();
  require(xs.h >= 2 && xs.w >= 2, "max_pool2x2: input " + xs.str() + " smaller than window");
  const Shape os{xs.n, xs.c, xs.h / 2, xs.w / 2};
  Tensor<T> out(os);
  std::vector<std::size_t> argmax(os.numel());
  std::size_t k = 0;
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * xs.c + c) * xs.plane();
      const T* p = x.value().data() + base;
      for (int oh = 0; oh < os.h; ++oh) {
        for (int ow = 0; ow < os.w; ++ow, ++k) {
          std::size_t best = static_cast<std::size_t>(2 * oh) * xs.w + 2 * ow;
          for (int dh = 0; dh < 2; ++dh) {
            for (int dw = 0; dw < 2; ++dw) {
              const std::size_t idx = static_cast<std::size_t>(2 * oh + dh) * xs.w + 2 * ow + dw;
              if (p[idx] > p[best]) best = idx;
            }
          }
          out[k] = p[best];
          argmax[k] = base + best;
        }
      }
    }
  }
  return Var<T>::make(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = x.value().plane(n, c);
      double s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += p[i];
      out.at(n, c, 0, 0) = static_cast<T>(s / plane);
    }
  }
  return Var<T>::make(std::move(out), {x}, [xs, plane](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T v = self.grad.at(n, c, 0, 0) / static_cast<T>(plane);
        T* d = g.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) d[i] += v;
      }
    }
  });
}

template <typename T>
Var<T> global_max_pool(const Var<T>& x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  std::vector<std::size_t> argmax(static_cast<std::size_t>(xs.n) * xs.c);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = x.value().plane(n, c);
      std::size_t best = 0;
      for (std::size_t i = 1; i < plane; ++i) {
        if (p[i] > p[best]) best = i;
      }
      const std::size_t k = static_cast<std::size_t>(n) * xs.c + c;
      out[k] = p[best];
      argmax[k] = k * plane + best;
    }
  }
  return Var<T>::make(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
  });
}

template <typename T>
Var<T> channel_mean(const Var<T>& x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, 1, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n) {
    T* o = out.plane(n, 0);
    for (int c = 0; c < xs.c; ++c) {
      const T* p = x.value().plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) o[i] += p[i];
    }
    for (std::size_t i = 0; i < plane; ++i) o[i] /= static_cast<T>(xs.c);
  }
  return Var<T>::make(std::move(out), {x}, [xs, plane](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    const T inv = T(1) / static_cast<T>(xs.c);
    for (int n = 0; n < xs.n; ++n) {
      const T* go = self.grad.plane(n, 0);
      for (int c = 0; c < xs.c; ++c) {
        T* d = g.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) d[i] += go[i] * inv;
      }
    }
  });
}

template <typename T>
Var<T> channel_max(const Var<T>& x) {
  const Shape xs = x.shape();
  const std::size_t plane = xs.plane();
  Tensor<T> out(Shape{xs.n, 1, xs.h, xs.w});
  std::vector<int> argmax(static_cast<std::size_t>(xs.n) * plane, 0);
  for (int n = 0; n < xs.n; ++n) {
    T* o = out.plane(n, 0);
    std::copy_n(x.value().plane(n, 0), plane, o);
    int* am = argmax.data() + static_cast<std::size_t>(n) * plane;
    for (int c = 1; c < xs.c; ++c) {
      const T* p = x.value().plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        if (p[i] > o[i]) {
          o[i] = p[i];
          am[i] = c;
        }
      }
    }
  }
  return Var<T>::make(std::move(out), {x}, [xs, plane, argmax = std::move(argmax)](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (int n = 0; n < xs.n; ++n) {
      const T* go = self.grad.plane(n, 0);
      const int* am = argmax.data() + static_cast<std::size_t>(n) * plane;
      for (std::size_t i = 0; i < plane; ++i) g.plane(n, am[i])[i] += go[i];
    }
  });
}

template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int height, int width) {
  const Shape xs = x.shape();
  require(height > 0 && width > 0, "resize_bilinear: target size must be positive");
  const Bilinear bh = bilinear_axis(xs.h, height);
  const Bilinear bw = bilinear_axis(xs.w, width);
  Tensor<T> out(Shape{xs.n, xs.c, height, width});
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* p = x.plane(n, c);
      T* o = out.plane(n, c);
      for (int oh = 0; oh < height; ++oh) {
        const T fh = static_cast<T>(bh.frac[oh]);
        const T* r0 = p + static_cast<std::size_t>(bh.lo[oh]) * xs.w;
        const T* r1 = p + static_cast<std::size_t>(bh.hi[oh]) * xs.w;
        for (int ow = 0; ow < width; ++ow) {
          const T fw = static_cast<T>(bw.frac[ow]);
          const int w0 = bw.lo[ow];
          const int w1 = bw.hi[ow];
          const T top = (T(1) - fw) * r0[w0] + fw * r0[w1];
          const T bottom = (T(1) - fw) * r1[w0] + fw * r1[w1];
          o[static_cast<std::size_t>(oh) * width + ow] = (T(1) - fh) * top + fh * bottom;
        }
      }
    }
  }
  return out;
}

template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int height, int width) {
  const Shape xs = x.shape();
  Tensor<T> out = resize_bilinear(x.value(), height, width);
  return Var<T>::make(std::move(out), {x}, [xs, height, width](Node<T>& self) {
    const Bilinear bh = bilinear_axis(xs.h, height);
    const Bilinear bw = bilinear_axis(xs.w, width);
    auto& g = self.inputs[0]->grad_buffer();
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < xs.c; ++c) {
        const T* go = self.grad.plane(n, c);
        T* d = g.plane(n, c);
        for (int oh = 0; oh < height; ++oh) {
          const T fh = static_cast<T>(bh.frac[oh]);
          T* r0 = d + static_cast<std::size_t>(bh.lo[oh]) * xs.w;
          T* r1 = d + static_cast<std::size_t>(bh.hi[oh]) * xs.w;
          for (int ow = 0; ow < width; ++ow) {
            const T fw = static_cast<T>(bw.frac[ow]);
            const T v = go[static_cast<std::size_t>(oh) * width + ow];
            r0[bw.lo[ow]] += (T(1) - fh) * (T(1) - fw) * v;
            r0[bw.hi[ow]] += (T(1) - fh) * fw * v;
            r1[bw.lo[ow]] += fh * (T(1) - fw) * v;
            r1[bw.hi[ow]] += fh * fw * v;
          }
        }
      }
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  double s = 0;
  for (T v : x.value().values()) s += v;
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(s));
  return Var<T>::make(std::move(out), {x}, [](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    const T v = self.grad[0];
    for (auto& d : g.values()) d += v;
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  require_same(x.shape(), weights.shape(), "weighted_sum");
  double s = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += static_cast<double>(x.value()[i]) * weights[i];
  Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(s));
  return Var<T>::make(std::move(out), {x}, [weights](Node<T>& self) {
    auto& g = self.inputs[0]->grad_buffer();
    const T v = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += v * weights[i];
  });
}

#define JAFFNET_INSTANTIATE_OPS(T)                                                                     \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);                   \
  template Var<T> depthwise_conv2d(const Var<T>&, const Var<T>&, const Var<T>&, ConvGeometry);         \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&, bool, \
                             T, T);                                                                    \
  template Var<T> relu(const Var<T>&);                                                                 \
  template Var<T> sigmoid(const Var<T>&);                                                              \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                   \
  template Var<T> scale(const Var<T>&, const Var<T>&);                                                 \
  template Var<T> outer_product(const Var<T>&, const Var<T>&);                                         \
  template Var<T> concat_channels(const Var<T>&, const Var<T>&);                                       \
  template Var<T> max_pool2x2(const Var<T>&);                                                          \
  template Var<T> global_avg_pool(const Var<T>&);                                                      \
  template Var<T> global_max_pool(const Var<T>&);                                                      \
  template Var<T> channel_mean(const Var<T>&);                                                         \
  template Var<T> channel_max(const Var<T>&);                                                          \
  template Var<T> upsample_bilinear(const Var<T>&, int, int);                                          \
  template Var<T> sum(const Var<T>&);                                                                  \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                                       \
  template Tensor<T> resize_bilinear(const Tensor<T>&, int, int);

JAFFNET_INSTANTIATE_OPS(float)
JAFFNET_INSTANTIATE_OPS(double)

}  // namespace jaffnet::ops
