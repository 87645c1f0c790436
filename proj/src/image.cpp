#include "jaffnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "jaffnet/errors.hpp"
#include "jaffnet/ops.hpp"

namespace jaffnet {

template <typename T>
Plane<T>::Plane(int height, int width, T fill)
    : height_(height), width_(width), values_(static_cast<std::size_t>(height) * width, fill) {
  if (height <= 0 || width <= 0) throw ShapeError("plane extents must be positive");
}

template <typename T>
Plane<T>::Plane(int height, int width, std::vector<T> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height <= 0 || width <= 0) throw ShapeError("plane extents must be positive");
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("plane " + std::to_string(height) + "x" + std::to_string(width) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

template class Plane<float>;
template class Plane<double>;
template class Plane<std::uint8_t>;

SaliencyMap::SaliencyMap(int height, int width, std::vector<double> values)
    : Plane(height, width, std::move(values)) {
  for (double v : this->values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw ShapeError("saliency values must lie in [0,1]");
  }
}

SaliencyMap SaliencyMap::from(const GrayImage& image) {
  std::vector<double> v(image.values().begin(), image.values().end());
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return SaliencyMap(image.height(), image.width(), std::move(v));
}

SaliencyMap SaliencyMap::from(const Gray8& image) {
  std::vector<double> v(image.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = image[i] / 255.0;
  return SaliencyMap(image.height(), image.width(), std::move(v));
}

GroundTruthMask::GroundTruthMask(int height, int width, std::vector<std::uint8_t> values)
    : Plane(height, width, std::move(values)) {
  for (auto v : this->values()) {
    if (v > 1) throw ShapeError("ground-truth masks must be binary");
  }
}

std::size_t GroundTruthMask::foreground() const {
  return static_cast<std::size_t>(std::count(values().begin(), values().end(), std::uint8_t{1}));
}

Gray8 read_png_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw DataError("empty PNG " + path.string());
  }
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return Gray8(static_cast<int>(image.height), static_cast<int>(image.width), std::move(buffer));
}

void write_png_gray(const std::filesystem::path& path, const Gray8& gray) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(gray.width());
  image.height = static_cast<png_uint_32>(gray.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, gray.values().data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

GrayImage to_unit(const Gray8& image) {
  GrayImage out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = static_cast<float>(image[i] / 255.0);
  return out;
}

namespace {
template <typename T>
Gray8 quantize_impl(const Plane<T>& image) {
  Gray8 out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return out;
}
}  // namespace

Gray8 quantize(const Plane<float>& image) { return quantize_impl(image); }
Gray8 quantize(const Plane<double>& image) { return quantize_impl(image); }

Gray8 mask_to_gray8(const GroundTruthMask& mask) {
  Gray8 out(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 255 : 0;
  return out;
}

GrayImage resize(const GrayImage& image, int height, int width) {
  if (image.height() == height && image.width() == width) return image;
  const Tensor<float> r = ops::resize_bilinear(to_tensor<float>(image), height, width);
  return GrayImage(height, width, std::vector<float>(r.values().begin(), r.values().end()));
}

SaliencyMap resize(const SaliencyMap& map, int height, int width) {
  if (map.height() == height && map.width() == width) return map;
  const Tensor<double> r = ops::resize_bilinear(to_tensor<double>(map), height, width);
  std::vector<double> v(r.values().begin(), r.values().end());
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return SaliencyMap(height, width, std::move(v));
}

}  // namespace jaffnet
