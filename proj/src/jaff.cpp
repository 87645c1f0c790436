#include "jaffnet/jaff.hpp"

#include "jaffnet/errors.hpp"

namespace jaffnet {

template <typename T>
Jaff<T>::Jaff(ParameterSet<T>& params, const std::string& name, int low_channels, int high_channels, Rng& rng)
    : cab_in(conv1x1<T>(params, name + ".cab.in", high_channels, low_channels, rng)),
      cab_avg(conv1x1<T>(params, name + ".cab.avg", low_channels, low_channels, rng)),
      cab_max(conv1x1<T>(params, name + ".cab.max", low_channels, low_channels, rng)),
      cab_shared(conv1x1<T>(params, name + ".cab.shared", low_channels, low_channels, rng)),
      sab_in(conv1x1<T>(params, name + ".sab.in", high_channels, low_channels, rng)),
      sab_rate2(conv3x3<T>(params, name + ".sab.rate2", 2, 2, rng, 1, 2)),
      sab_rate4(conv3x3<T>(params, name + ".sab.rate4", 2, 1, rng, 1, 4)),
      fuse_depthwise(params, name + ".fuse.depthwise", low_channels, 3, ops::ConvGeometry{1, 2, 2}, rng),
      fuse_pointwise(conv1x1<T>(params, name + ".fuse.pointwise", low_channels, low_channels, rng)),
      alpha(params.add_parameter(name + ".alpha", Tensor<T>(Shape{1, 1, 1, 1}))),
      low_channels_(low_channels),
      high_channels_(high_channels) {}

template <typename T>
Var<T> Jaff<T>::channel_attention(const Var<T>& high_up) const {
  const Var<T> f = cab_in(high_up);
  const Var<T> avg = cab_shared(cab_avg(ops::global_avg_pool(f)));
  const Var<T> max = cab_shared(cab_max(ops::global_max_pool(f)));
  return ops::sigmoid(ops::add(avg, max));
}

template <typename T>
Var<T> Jaff<T>::spatial_logits(const Var<T>& high_up) const {
  const Var<T> f = sab_in(high_up);
  const Var<T> pooled = ops::concat_channels(ops::channel_max(f), ops::channel_mean(f));
  return sab_rate4(sab_rate2(pooled));
}

template <typename T>
Var<T> Jaff<T>::fuse_maps(const Var<T>& channel, const Var<T>& spatial, Var<T>* outer) const {
  Var<T> product = ops::outer_product(channel, spatial);
  if (outer) *outer = product;
  return fuse_pointwise(fuse_depthwise(product));
}

template <typename T>
JaffResult<T> Jaff<T>::operator()(const Var<T>& low, const Var<T>& high) const {
  const Shape ls = low.shape();
  const Shape hs = high.shape();
  if (ls.c != low_channels_ || hs.c != high_channels_ || ls.n != hs.n) {
    throw ShapeError("jaff expects low " + std::to_string(low_channels_) + " / high " + std::to_string(high_channels_) +
                     " channels, got " + ls.str() + " and " + hs.str());
  }
  JaffResult<T> r;
  r.high_up = (hs.h == ls.h && hs.w == ls.w) ? high : ops::upsample_bilinear(high, ls.h, ls.w);
  auto& a = r.attention;
  a.alpha = alpha;
  a.channel = channel_attention(r.high_up);
  a.spatial = spatial_attention(r.high_up);
  a.joint = fuse_maps(a.channel, a.spatial, &a.outer);
  r.refined = ops::add(ops::scale(ops::mul(low, a.joint), alpha), low);
  r.fused = ops::concat_channels(r.refined, r.high_up);
  return r;
}

template class Jaff<float>;
template class Jaff<double>;

}  // namespace jaffnet
