#pragma once

#include <array>
#include <cstdint>

#include "jaffnet/config.hpp"
#include "jaffnet/layers.hpp"

namespace jaffnet {

/// Outputs of encoder stages E1..E5.
template <typename T>
struct EncoderFeatures {
  std::array<Var<T>, 5> stages;
};

/// ResNet18-style encoder: a stride-1 3x3 stem without pooling, four
/// two-block stages (E1..E4, stride 2 at the entry of E2..E4), and an extra
/// stage E5 of 2x2 max pooling followed by two basic blocks.
template <typename T>
class Encoder {
 public:
  static constexpr int kDownsampleFactor = 16;

  Encoder(ParameterSet<T>& params, const NetworkConfig& config, Rng& rng);

  /// image: [N, input_channels, H, W] with H, W divisible by 16.
  EncoderFeatures<T> operator()(const Var<T>& image, Mode mode) const;

  [[nodiscard]] const std::array<int, 5>& channels() const { return channels_; }

 private:
  int input_channels_;
  std::array<int, 5> channels_;
  ConvBnRelu<T> stem_;
  std::array<std::array<BasicBlock<T>, 2>, 5> stages_;
};

/// Standalone encoder with its own parameter registry.
template <typename T>
struct EncoderState {
  ParameterSet<T> params;
  Encoder<T> encoder;

  EncoderState(const NetworkConfig& config, std::uint64_t seed);
};

/// Throws ShapeError unless both spatial extents are divisible by 16.
void check_input_extent(int height, int width);

}  // namespace jaffnet
