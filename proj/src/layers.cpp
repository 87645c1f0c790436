#include "jaffnet/layers.hpp"

#include <cmath>

#include "jaffnet/errors.hpp"

namespace jaffnet {

template <typename T>
Var<T> ParameterSet<T>::add_parameter(const std::string& name, Tensor<T> value) {
  if (find(name)) throw ConfigError("duplicate parameter name " + name);
  auto var = Var<T>::parameter(std::move(value));
  entries_.push_back({name, var, true});
  return var;
}

template <typename T>
Var<T> ParameterSet<T>::add_buffer(const std::string& name, Tensor<T> value) {
  if (find(name)) throw ConfigError("duplicate buffer name " + name);
  auto var = Var<T>::constant(std::move(value));
  entries_.push_back({name, var, false});
  return var;
}

template <typename T>
std::vector<typename ParameterSet<T>::Entry> ParameterSet<T>::parameters() const {
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    if (e.learnable) out.push_back(e);
  }
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.learnable) n += e.var.value().size();
  }
  return n;
}

template <typename T>
const typename ParameterSet<T>::Entry* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) {
    if (e.learnable) e.var.zero_grad();
  }
}

template <typename T>
Tensor<T> he_normal(const Shape& shape, int fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Conv2d<T>::Conv2d(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, int kernel,
                  ops::ConvGeometry g, Rng& rng, bool with_bias)
    : geometry(g) {
  const Shape ws{out_channels, in_channels, kernel, kernel};
  weight = params.add_parameter(name + ".weight", he_normal<T>(ws, in_channels * kernel * kernel, rng));
  if (with_bias) bias = params.add_parameter(name + ".bias", Tensor<T>(Shape{1, out_channels, 1, 1}));
}

template <typename T>
Conv2d<T> conv3x3(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, Rng& rng,
                  int stride, int dilation, bool bias) {
  return Conv2d<T>(params, name, in_channels, out_channels, 3, ops::ConvGeometry{stride, dilation, dilation}, rng,
                   bias);
}

template <typename T>
Conv2d<T> conv1x1(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels, Rng& rng,
                  int stride, bool bias) {
  return Conv2d<T>(params, name, in_channels, out_channels, 1, ops::ConvGeometry{stride, 0, 1}, rng, bias);
}

template <typename T>
DepthwiseConv2d<T>::DepthwiseConv2d(ParameterSet<T>& params, const std::string& name, int channels, int kernel,
                                    ops::ConvGeometry g, Rng& rng)
    : geometry(g) {
  weight = params.add_parameter(name + ".weight", he_normal<T>(Shape{channels, 1, kernel, kernel}, kernel * kernel, rng));
  bias = params.add_parameter(name + ".bias", Tensor<T>(Shape{1, channels, 1, 1}));
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParameterSet<T>& params, const std::string& name, int channels) {
  const Shape s{1, channels, 1, 1};
  gamma = params.add_parameter(name + ".gamma", Tensor<T>(s, T(1)));
  beta = params.add_parameter(name + ".beta", Tensor<T>(s));
  running_mean = params.add_buffer(name + ".running_mean", Tensor<T>(s));
  running_var = params.add_buffer(name + ".running_var", Tensor<T>(s, T(1)));
}

template <typename T>
Var<T> BatchNorm2d<T>::operator()(const Var<T>& x, Mode mode) const {
  // The running estimates live in shared nodes, so mutation through a copy is visible to the owner.
  Var<T> mean = running_mean;
  Var<T> var = running_var;
  return ops::batch_norm(x, gamma, beta, mean.mutable_value(), var.mutable_value(), mode == Mode::train,
                         static_cast<T>(kMomentum), static_cast<T>(kEps));
}

template <typename T>
ConvBnRelu<T>::ConvBnRelu(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels,
                          Rng& rng, int stride)
    : conv(conv3x3<T>(params, name + ".conv", in_channels, out_channels, rng, stride, 1, false)),
      bn(params, name + ".bn", out_channels) {}

template <typename T>
BasicBlock<T>::BasicBlock(ParameterSet<T>& params, const std::string& name, int in_channels, int out_channels,
                          int stride, Rng& rng)
    : conv1(conv3x3<T>(params, name + ".conv1", in_channels, out_channels, rng, stride, 1, false)),
      bn1(params, name + ".bn1", out_channels),
      conv2(conv3x3<T>(params, name + ".conv2", out_channels, out_channels, rng, 1, 1, false)),
      bn2(params, name + ".bn2", out_channels) {
  if (stride != 1 || in_channels != out_channels) {
    projection = conv1x1<T>(params, name + ".proj", in_channels, out_channels, rng, stride, false);
    projection_bn.emplace(params, name + ".proj_bn", out_channels);
  }
}

template <typename T>
Var<T> BasicBlock<T>::operator()(const Var<T>& x, Mode mode) const {
  Var<T> y = ops::relu(bn1(conv1(x), mode));
  y = bn2(conv2(y), mode);
  Var<T> shortcut = projection ? (*projection_bn)((*projection)(x), mode) : x;
  return ops::relu(ops::add(y, shortcut));
}

#define JAFFNET_INSTANTIATE_LAYERS(T)                                                                             \
  template class ParameterSet<T>;                                                                                 \
  template Tensor<T> he_normal(const Shape&, int, Rng&);                                                          \
  template class Conv2d<T>;                                                                                       \
  template Conv2d<T> conv3x3(ParameterSet<T>&, const std::string&, int, int, Rng&, int, int, bool);               \
  template Conv2d<T> conv1x1(ParameterSet<T>&, const std::string&, int, int, Rng&, int, bool);                    \
  template class DepthwiseConv2d<T>;                                                                              \
  template class BatchNorm2d<T>;                                                                                  \
  template class ConvBnRelu<T>;                                                                                   \
  template class BasicBlock<T>;

JAFFNET_INSTANTIATE_LAYERS(float)
JAFFNET_INSTANTIATE_LAYERS(double)

}  // namespace jaffnet
