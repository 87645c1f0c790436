#include "jaffnet/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "jaffnet/errors.hpp"

namespace jaffnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
    throw ShapeError("tensor extents must be positive, got " + shape.str());
  }
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor of shape " + shape.str() + " given " + std::to_string(data_.size()) + " values");
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void Tensor<T>::zero(const Shape& shape) {
  shape_ = shape;
  data_.assign(shape.numel(), T(0));
}

template <typename T>
void Tensor<T>::reshape(const Shape& shape) {
  if (shape.numel() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  }
  shape_ = shape;
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("elementwise add of " + shape_.str() + " and " + other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
Tensor<T>& Tensor<T>::operator*=(T s) {
  for (auto& v : data_) v *= s;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::sample(int n) const {
  Shape s = shape_;
  s.n = 1;
  const std::size_t count = s.numel();
  std::vector<T> values(data_.begin() + static_cast<std::ptrdiff_t>(n * count),
                        data_.begin() + static_cast<std::ptrdiff_t>((n + 1) * count));
  return Tensor(s, std::move(values));
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>> samples) {
  if (samples.empty()) throw ShapeError("cannot stack an empty batch");
  Shape s = samples.front().shape();
  if (s.n != 1) throw ShapeError("stack expects single-sample tensors, got " + s.str());
  std::vector<T> values;
  values.reserve(s.numel() * samples.size());
  for (const auto& t : samples) {
    if (t.shape() != s) throw ShapeError("stack of mismatched shapes " + s.str() + " and " + t.shape().str());
    values.insert(values.end(), t.values().begin(), t.values().end());
  }
  s.n = static_cast<int>(samples.size());
  return Tensor<T>(s, std::move(values));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> stack(std::span<const Tensor<float>>);
template Tensor<double> stack(std::span<const Tensor<double>>);

}  // namespace jaffnet
