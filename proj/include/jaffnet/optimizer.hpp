#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jaffnet/layers.hpp"

namespace jaffnet {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over the learnable entries of a parameter set (bias-corrected, no weight decay).
/// Parameters without a gradient this step are left untouched.
template <typename T>
class Adam {
 public:
  Adam(const ParameterSet<T>& params, AdamConfig config);

  void step();
  void zero_grad();

  [[nodiscard]] std::int64_t steps() const { return steps_; }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] const std::vector<Tensor<T>>& first_moments() const { return m_; }
  [[nodiscard]] const std::vector<Tensor<T>>& second_moments() const { return v_; }
  /// Per-parameter step counts (a parameter only advances when it had a gradient).
  [[nodiscard]] const std::vector<std::int64_t>& parameter_steps() const { return t_; }

  /// Restores moments in names() order. Throws CheckpointError on shape mismatch.
  void load_state(std::int64_t steps, std::vector<std::int64_t> parameter_steps, std::vector<Tensor<T>> m,
                  std::vector<Tensor<T>> v);

 private:
  AdamConfig config_;
  std::vector<Var<T>> params_;
  std::vector<std::string> names_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::vector<std::int64_t> t_;
  std::int64_t steps_ = 0;
};

}  // namespace jaffnet
