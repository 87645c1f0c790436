#include "jaffnet/encoder.hpp"

#include "jaffnet/errors.hpp"

namespace jaffnet {

void check_input_extent(int height, int width) {
  if (height % Encoder<float>::kDownsampleFactor != 0) {
    throw ShapeError("input height " + std::to_string(height) + " is not divisible by 16");
  }
  if (width % Encoder<float>::kDownsampleFactor != 0) {
    throw ShapeError("input width " + std::to_string(width) + " is not divisible by 16");
  }
}

template <typename T>
Encoder<T>::Encoder(ParameterSet<T>& params, const NetworkConfig& config, Rng& rng)
    : input_channels_(config.input_channels), channels_(config.encoder_channels()) {
  config.validate();
  stem_ = ConvBnRelu<T>(params, "encoder.stem", config.input_channels, channels_[0], rng);
  int in = channels_[0];
  for (int s = 0; s < 5; ++s) {
    const int out = channels_[s];
    const int stride = (s >= 1 && s <= 3) ? 2 : 1;
    const std::string prefix = "encoder.e" + std::to_string(s + 1);
    stages_[s][0] = BasicBlock<T>(params, prefix + ".block1", in, out, stride, rng);
    stages_[s][1] = BasicBlock<T>(params, prefix + ".block2", out, out, 1, rng);
    in = out;
  }
}

template <typename T>
EncoderFeatures<T> Encoder<T>::operator()(const Var<T>& image, Mode mode) const {
  const Shape s = image.shape();
  if (s.c != input_channels_) {
    throw ShapeError("encoder expects " + std::to_string(input_channels_) + " input channels, got " + s.str());
  }
  check_input_extent(s.h, s.w);
  EncoderFeatures<T> out;
  Var<T> x = stem_(image, mode);
  for (int i = 0; i < 5; ++i) {
    if (i == 4) x = ops::max_pool2x2(x);
    x = stages_[i][0](x, mode);
    x = stages_[i][1](x, mode);
    out.stages[i] = x;
  }
  return out;
}

template <typename T>
EncoderState<T>::EncoderState(const NetworkConfig& config, std::uint64_t seed)
    : params(), encoder([&]() -> Encoder<T> {
        Rng rng(seed);
        return Encoder<T>(params, config, rng);
      }()) {}

template class Encoder<float>;
template class Encoder<double>;
template struct EncoderState<float>;
template struct EncoderState<double>;

}  // namespace jaffnet
