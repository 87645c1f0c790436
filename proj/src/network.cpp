#include "jaffnet/network.hpp"

#include "jaffnet/errors.hpp"

namespace jaffnet {

template <typename T>
JaffNet<T>::JaffNet(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  encoder_.emplace(params_, config_, rng);
  const auto enc = config_.encoder_channels();
  const auto dec = config_.scaled_decoder_widths();

  if (config_.use_drf) {
    drf_.emplace(params_, "drf", enc[4], config_.mrf_rates, rng);
  } else {
    context_blocks_[0] = BasicBlock<T>(params_, "context.block1", enc[4], enc[4], 1, rng);
    context_blocks_[1] = BasicBlock<T>(params_, "context.block2", enc[4], enc[4], 1, rng);
  }

  // D1 fuses E4 with the context stage, D2..D4 fuse E3..E1 with the previous stage.
  int high = enc[4];
  for (int i = 0; i < 4; ++i) {
    const int low = enc[3 - i];
    const std::string name = "decoder.d" + std::to_string(i + 1);
    if (config_.use_jaff) jaff_[i] = Jaff<T>(params_, name + ".jaff", low, high, rng);
    decode_[i] = ConvBnRelu<T>(params_, name + ".block", low + high, dec[i], rng);
    high = dec[i];
  }

  heads_[0] = conv3x3<T>(params_, "head.context", enc[4], 1, rng);
  for (int i = 0; i < 4; ++i) heads_[i + 1] = conv3x3<T>(params_, "head.d" + std::to_string(i + 1), dec[i], 1, rng);
}

template <typename T>
NetworkTrace<T> JaffNet<T>::trace(const Var<T>& image, Mode mode) const {
  NetworkTrace<T> t;
  const int height = image.shape().h;
  const int width = image.shape().w;
  t.encoder = (*encoder_)(image, mode);

  if (drf_) {
    t.context = (*drf_)(t.encoder.stages[4]);
  } else {
    t.context = context_blocks_[1](context_blocks_[0](t.encoder.stages[4], mode), mode);
  }

  Var<T> high = t.context;
  for (int i = 0; i < 4; ++i) {
    const Var<T>& low = t.encoder.stages[3 - i];
    Var<T> fused;
    if (config_.use_jaff) {
      t.fusion[i] = jaff_[i](low, high);
      fused = t.fusion[i]->fused;
    } else {
      fused = ops::concat_channels(low, ops::upsample_bilinear(high, low.shape().h, low.shape().w));
    }
    high = decode_[i](fused, mode);
    t.decoder[i] = high;
  }

  for (int k = 0; k < kSideOutputs; ++k) {
    const Var<T>& features = k == 0 ? t.context : t.decoder[k - 1];
    t.side_logits[k] = heads_[k](features);
    const Var<T>& logits = t.side_logits[k];
    const bool native = logits.shape().h == height && logits.shape().w == width;
    t.output.side_logits[k] = native ? logits : ops::upsample_bilinear(logits, height, width);
    t.output.side_outputs[k] = ops::sigmoid(t.output.side_logits[k]);
  }
  t.output.final = t.output.side_outputs[kSideOutputs - 1];
  return t;
}

template class JaffNet<float>;
template class JaffNet<double>;

}  // namespace jaffnet
