#pragma once

#include "jaffnet/autograd.hpp"

// Differentiable NCHW primitives. Every op checks its shape contract and
// throws ShapeError on mismatch.
namespace jaffnet::ops {

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
  int dilation = 1;
};

/// Spatial output extent of a convolution along one axis.
int conv_output_extent(int input, int kernel, const ConvGeometry& g);

/// Dense convolution. weight: [out, in, k, k]; bias: [1, out, 1, 1] or undefined.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geometry);

/// Per-channel convolution. weight: [C, 1, k, k]; bias: [1, C, 1, 1] or undefined.
template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, ConvGeometry geometry);

/// Batch normalization over (N, H, W). In training mode the running
/// estimates are updated in place; in eval mode they are read only.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                  Tensor<T>& running_var, bool training, T momentum, T eps);

template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

/// alpha (a single-element tensor) times x.
template <typename T>
Var<T> scale(const Var<T>& x, const Var<T>& alpha);

/// [N,C,1,1] x [N,1,H,W] -> [N,C,H,W], out[n,c,h,w] = a[n,c] * b[n,h,w].
template <typename T>
Var<T> outer_product(const Var<T>& channel, const Var<T>& spatial);

template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b);

/// 2x2 window, stride 2.
template <typename T>
Var<T> max_pool2x2(const Var<T>& x);

/// Pool over H, W -> [N,C,1,1].
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);
template <typename T>
Var<T> global_max_pool(const Var<T>& x);

/// Pool over C -> [N,1,H,W].
template <typename T>
Var<T> channel_mean(const Var<T>& x);
template <typename T>
Var<T> channel_max(const Var<T>& x);

/// Bilinear resize with half-pixel centers (align_corners disabled).
template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int height, int width);

/// Sum of all elements -> [1,1,1,1].
template <typename T>
Var<T> sum(const Var<T>& x);

/// Sum of x * weights -> [1,1,1,1]; weights is a constant of x's shape.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);

/// Non-differentiable bilinear resize shared with the data pipeline.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& x, int height, int width);

}  // namespace jaffnet::ops
