#pragma once

#include <array>

#include "jaffnet/layers.hpp"

namespace jaffnet {

/// Three parallel size-preserving 3x3 dilated convs, summed, then ReLU.
template <typename T>
class MrfUnit {
 public:
  MrfUnit() = default;
  MrfUnit(ParameterSet<T>& params, const std::string& name, int channels, const std::array<int, 3>& rates, Rng& rng);

  Var<T> operator()(const Var<T>& x) const;

  std::array<Conv2d<T>, 3> branches;
  int channels = 0;
};

/// Recorded intermediates of one DRF forward pass.
template <typename T>
struct DrfTrace {
  std::array<Var<T>, 3> unit_inputs;  // X + sum_{j<i} Y_j
  std::array<Var<T>, 4> outputs;      // Y_1..Y_3 from the units, Y_4 global context
  Var<T> output;                      // X + Y_1 + Y_2 + Y_3 + Y_4
};

/// Dense receptive field module: a densely connected chain of three MRF
/// units plus a global-average-pool context branch, summed with the input.
template <typename T>
class Drf {
 public:
  Drf() = default;
  Drf(ParameterSet<T>& params, const std::string& name, int channels, const std::array<int, 3>& rates, Rng& rng);

  Var<T> operator()(const Var<T>& x) const { return trace(x).output; }
  DrfTrace<T> trace(const Var<T>& x) const;

  std::array<MrfUnit<T>, 3> units;
  Conv2d<T> global;
  int channels = 0;
};

}  // namespace jaffnet
