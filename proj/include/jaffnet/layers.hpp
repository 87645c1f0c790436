#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jaffnet/autograd.hpp"
#include "jaffnet/ops.hpp"

namespace jaffnet {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

/// Ordered registry of named learnable parameters and state buffers.
/// Entries share nodes with the layers that created them.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
    bool learnable;
  };

  Var<T> add_parameter(const std::string& name, Tensor<T> value);
  Var<T> add_buffer(const std::string& name, Tensor<T> value);

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] std::vector<Entry> parameters() const;
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] const Entry* find(const std::string& name) const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

/// He-normal draw with standard deviation sqrt(2 / fan_in).
template <typename T>
Tensor<T> he_normal(const Shape& shape, int fan_in, Rng& rng);

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, int kernel,
         ops::ConvGeometry geometry, Rng& rng, bool bias = true);

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, geometry); }

  Var<T> weight;
  Var<T> bias;
  ops::ConvGeometry geometry;
};

/// 3x3 convolution with padding equal to its dilation (size preserving at stride 1).
template <typename T>
Conv2d<T> conv3x3(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, Rng& rng,
                  int stride = 1, int dilation = 1, bool bias = true);

template <typename T>
Conv2d<T> conv1x1(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, Rng& rng,
                  int stride = 1, bool bias = true);

template <typename T>
class DepthwiseConv2d {
 public:
  DepthwiseConv2d() = default;
  DepthwiseConv2d(ParameterSet<T>& params, const std::string& name, int channels, int kernel,
                  ops::ConvGeometry geometry, Rng& rng);

  Var<T> operator()(const Var<T>& x) const { return ops::depthwise_conv2d(x, weight, bias, geometry); }

  Var<T> weight;
  Var<T> bias;
  ops::ConvGeometry geometry;
};

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(ParameterSet<T>& params, const std::string& name, int channels);

  Var<T> operator()(const Var<T>& x, Mode mode) const;

  Var<T> gamma;
  Var<T> beta;
  Var<T> running_mean;
  Var<T> running_var;
};

/// conv3x3 -> BN -> ReLU.
template <typename T>
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, Rng& rng,
             int stride = 1);

  Var<T> operator()(const Var<T>& x, Mode mode) const { return ops::relu(bn(conv(x), mode)); }

  Conv2d<T> conv;
  BatchNorm2d<T> bn;
};

/// Residual basic block: conv3x3-BN-ReLU-conv3x3-BN plus shortcut, then ReLU.
/// The shortcut is a 1x1 projection with BN when stride or width changes.
template <typename T>
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, int stride,
             Rng& rng);

  Var<T> operator()(const Var<T>& x, Mode mode) const;

  Conv2d<T> conv1;
  BatchNorm2d<T> bn1;
  Conv2d<T> conv2;
  BatchNorm2d<T> bn2;
  std::optional<Conv2d<T>> projection;
  std::optional<BatchNorm2d<T>> projection_bn;
};

}  // namespace jaffnet
