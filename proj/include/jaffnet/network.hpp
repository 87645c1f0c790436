#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "jaffnet/config.hpp"
#include "jaffnet/drf.hpp"
#include "jaffnet/encoder.hpp"
#include "jaffnet/jaff.hpp"

namespace jaffnet {

/// Saliency maps at input resolution, values in [0,1].
template <typename T>
struct NetworkOutput {
  /// [0] taps the context (DRF) stage, [1..4] the decode stages D1..D4.
  std::array<Var<T>, kSideOutputs> side_outputs;
  /// Input-resolution logits; side_outputs[k] = sigmoid(side_logits[k]).
  std::array<Var<T>, kSideOutputs> side_logits;
  /// The D4 side output.
  Var<T> final;
};

/// Everything a forward pass produced, for inspection and tests.
template <typename T>
struct NetworkTrace {
  EncoderFeatures<T> encoder;
  Var<T> context;
  std::array<Var<T>, 4> decoder;
  std::array<std::optional<JaffResult<T>>, 4> fusion;
  /// Side-head logits before upsampling, at each stage's native resolution.
  std::array<Var<T>, kSideOutputs> side_logits;
  NetworkOutput<T> output;
};

/// Encoder -> DRF -> four JAFF decode stages, with one 3x3 side head per
/// stage (conv -> bilinear upsample -> sigmoid).
template <typename T>
class JaffNet {
 public:
  JaffNet(const NetworkConfig& config, std::uint64_t seed);

  JaffNet(const JaffNet&) = delete;
  JaffNet& operator=(const JaffNet&) = delete;

  NetworkOutput<T> operator()(const Var<T>& image, Mode mode) const { return trace(image, mode).output; }
  NetworkTrace<T> trace(const Var<T>& image, Mode mode) const;

  [[nodiscard]] const NetworkConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  [[nodiscard]] const ParameterSet<T>& params() const { return params_; }
  [[nodiscard]] std::size_t count_params() const { return params_.parameter_count(); }

  [[nodiscard]] const Encoder<T>& encoder() const { return *encoder_; }
  [[nodiscard]] const std::optional<Drf<T>>& drf() const { return drf_; }
  [[nodiscard]] const std::array<Jaff<T>, 4>& fusions() const { return jaff_; }

 private:
  NetworkConfig config_;
  ParameterSet<T> params_;
  std::optional<Encoder<T>> encoder_;
  std::optional<Drf<T>> drf_;
  std::array<BasicBlock<T>, 2> context_blocks_;
  std::array<Jaff<T>, 4> jaff_;
  std::array<ConvBnRelu<T>, 4> decode_;
  std::array<Conv2d<T>, kSideOutputs> heads_;
};

/// Published parameter count of the full configuration, in millions.
inline constexpr double kReferenceParamsMillions = 41.94;

}  // namespace jaffnet
