#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jaffnet/tensor.hpp"

namespace jaffnet {

/// Row-major single-channel 2-D array.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{});
  Plane(int height, int width, std::vector<T> values);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  T& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * width_ + c]; }
  const T& operator()(int r, int c) const { return values_[static_cast<std::size_t>(r) * width_ + c]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  std::span<T> values() { return values_; }
  [[nodiscard]] std::span<const T> values() const { return values_; }
  [[nodiscard]] bool same_extent(const auto& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

/// Gray image with values in [0,1].
using GrayImage = Plane<float>;
using Gray8 = Plane<std::uint8_t>;

/// Predicted saliency probabilities in [0,1].
class SaliencyMap : public Plane<double> {
 public:
  SaliencyMap() = default;
  /// Throws ShapeError if any value is non-finite or outside [0,1].
  SaliencyMap(int height, int width, std::vector<double> values);
  static SaliencyMap from(const GrayImage& image);
  static SaliencyMap from(const Gray8& image);
};

/// Strictly binary ground truth (0 background, 1 defect).
class GroundTruthMask : public Plane<std::uint8_t> {
 public:
  GroundTruthMask() = default;
  GroundTruthMask(int height, int width, std::uint8_t fill = 0) : Plane(height, width, fill) {}
  /// Throws ShapeError if any value is not 0 or 1.
  GroundTruthMask(int height, int width, std::vector<std::uint8_t> values);

  [[nodiscard]] std::size_t foreground() const;
};

Gray8 read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const Gray8& image);

GrayImage to_unit(const Gray8& image);
/// round(v * 255) with clamping to [0,255].
Gray8 quantize(const Plane<float>& image);
Gray8 quantize(const Plane<double>& image);
Gray8 mask_to_gray8(const GroundTruthMask& mask);

/// Bilinear resize with half-pixel centres.
GrayImage resize(const GrayImage& image, int height, int width);
SaliencyMap resize(const SaliencyMap& map, int height, int width);

/// 1x1xHxW tensor of the plane's values.
template <typename T, typename U>
Tensor<T> to_tensor(const Plane<U>& plane) {
  Tensor<T> t(Shape{1, 1, plane.height(), plane.width()});
  for (std::size_t i = 0; i < plane.size(); ++i) t[i] = static_cast<T>(plane[i]);
  return t;
}

}  // namespace jaffnet
