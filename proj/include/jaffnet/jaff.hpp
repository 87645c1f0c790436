#pragma once

#include "jaffnet/layers.hpp"

namespace jaffnet {

/// Intermediate maps of one JAFF application.
template <typename T>
struct AttentionBundle {
  Var<T> channel;      // M_c, [N, C_l, 1, 1], sigmoid range
  Var<T> spatial;      // M_s, [N, 1, H_l, W_l], sigmoid range
  Var<T> outer;        // M_c (x) M_s before the depthwise separable conv
  Var<T> joint;        // M, [N, C_l, H_l, W_l], unbounded
  Var<T> alpha;
};

template <typename T>
struct JaffResult {
  Var<T> fused;        // CAT(F_l', F_h_up), C_l + C_h channels
  Var<T> refined;      // F_l' = alpha * (F_l . M) + F_l
  Var<T> high_up;      // F_h resized to F_l's extent
  AttentionBundle<T> attention;
};

/// Joint attention-guided feature fusion. The high-level features are
/// upsampled to the low-level extent; a channel branch and a spatial branch
/// each start with a 1x1 conv C_h -> C_l, their maps are combined by an outer
/// product and a depthwise separable 3x3 conv (dilation 2), and the result
/// reweights F_l through a learnable scale alpha (initialized to zero).
template <typename T>
class Jaff {
 public:
  Jaff() = default;
  Jaff(ParameterSet<T>& params, const std::string& name, int low_channels, int high_channels, Rng& rng);

  Var<T> channel_attention(const Var<T>& high_up) const;
  /// Spatial logits before the sigmoid.
  Var<T> spatial_logits(const Var<T>& high_up) const;
  Var<T> spatial_attention(const Var<T>& high_up) const { return ops::sigmoid(spatial_logits(high_up)); }
  /// Returns M; `outer` receives the pre-convolution outer product when non-null.
  Var<T> fuse_maps(const Var<T>& channel, const Var<T>& spatial, Var<T>* outer = nullptr) const;

  JaffResult<T> operator()(const Var<T>& low, const Var<T>& high) const;

  [[nodiscard]] int low_channels() const { return low_channels_; }
  [[nodiscard]] int high_channels() const { return high_channels_; }

  Conv2d<T> cab_in, cab_avg, cab_max, cab_shared;
  Conv2d<T> sab_in, sab_rate2, sab_rate4;
  DepthwiseConv2d<T> fuse_depthwise;
  Conv2d<T> fuse_pointwise;
  Var<T> alpha;

 private:
  int low_channels_ = 0;
  int high_channels_ = 0;
};

}  // namespace jaffnet
