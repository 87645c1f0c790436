#include "jaffnet/drf.hpp"

#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace {
void check_channels(const Shape& s, int channels, const char* what) {
  if (s.c != channels) {
    throw ShapeError(std::string(what) + " expects " + std::to_string(channels) + " channels, got " + s.str());
  }
}
}  // namespace

template <typename T>
MrfUnit<T>::MrfUnit(ParameterSet<T>& params, const std::string& name, int c, const std::array<int, 3>& rates,
                    Rng& rng)
    : channels(c) {
  for (std::size_t b = 0; b < 3; ++b) {
    branches[b] = conv3x3<T>(params, name + ".rate" + std::to_string(rates[b]), c, c, rng, 1, rates[b]);
  }
}

template <typename T>
Var<T> MrfUnit<T>::operator()(const Var<T>& x) const {
  check_channels(x.shape(), channels, "mrf unit");
  Var<T> y = branches[0](x);
  y = ops::add(y, branches[1](x));
  y = ops::add(y, branches[2](x));
  return ops::relu(y);
}

template <typename T>
Drf<T>::Drf(ParameterSet<T>& params, const std::string& name, int c, const std::array<int, 3>& rates, Rng& rng)
    : global(conv1x1<T>(params, name + ".global", c, c, rng)), channels(c) {
  for (std::size_t i = 0; i < 3; ++i) {
    units[i] = MrfUnit<T>(params, name + ".mrf" + std::to_string(i + 1), c, rates, rng);
  }
}

template <typename T>
DrfTrace<T> Drf<T>::trace(const Var<T>& x) const {
  check_channels(x.shape(), channels, "drf");
  DrfTrace<T> t;
  Var<T> dense = x;
  for (std::size_t i = 0; i < 3; ++i) {
    t.unit_inputs[i] = dense;
    t.outputs[i] = units[i](dense);
    dense = ops::add(dense, t.outputs[i]);
  }
  // Bilinear upsampling of a 1x1 map is a broadcast.
  t.outputs[3] = ops::upsample_bilinear(global(ops::global_avg_pool(x)), x.shape().h, x.shape().w);
  t.output = ops::add(dense, t.outputs[3]);
  return t;
}

template class MrfUnit<float>;
template class MrfUnit<double>;
template class Drf<float>;
template class Drf<double>;

}  // namespace jaffnet
