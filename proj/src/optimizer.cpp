#include "jaffnet/optimizer.hpp"

#include <cmath>

#include "jaffnet/errors.hpp"

namespace jaffnet {

template <typename T>
Adam<T>::Adam(const ParameterSet<T>& params, AdamConfig config) : config_(config) {
  if (!(config.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  for (const auto& e : params.parameters()) {
    params_.push_back(e.var);
    names_.push_back(e.name);
    m_.emplace_back(e.var.shape());
    v_.emplace_back(e.var.shape());
    t_.push_back(0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Tensor<T>& g = params_[k].grad();
    if (g.size() == 0) continue;
    const std::int64_t t = ++t_[k];
    const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t));
    const T step_size = static_cast<T>(config_.learning_rate / bias1);
    const T root_bias2 = static_cast<T>(std::sqrt(bias2));
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T eps = static_cast<T>(config_.eps);
    Tensor<T>& p = params_[k].mutable_value();
    Tensor<T>& m = m_[k];
    Tensor<T>& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      p[i] -= step_size * m[i] / (std::sqrt(v[i]) / root_bias2 + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Adam<T>::load_state(std::int64_t steps, std::vector<std::int64_t> parameter_steps, std::vector<Tensor<T>> m,
                         std::vector<Tensor<T>> v) {
  if (m.size() != params_.size() || v.size() != params_.size() || parameter_steps.size() != params_.size()) {
    throw CheckpointError("optimizer state has " + std::to_string(m.size()) + " tensors, model has " +
                          std::to_string(params_.size()));
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!(m[k].shape() == params_[k].shape()) || !(v[k].shape() == params_[k].shape())) {
      throw CheckpointError("optimizer state shape mismatch for '" + names_[k] + "': " + m[k].shape().str() +
                            " vs " + params_[k].shape().str());
    }
  }
  steps_ = steps;
  t_ = std::move(parameter_steps);
  m_ = std::move(m);
  v_ = std::move(v);
}

template class Adam<float>;
template class Adam<double>;

}  // namespace jaffnet
