#include "jaffnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "jaffnet/errors.hpp"
#include "jaffnet/layers.hpp"

namespace jaffnet {

namespace fs = std::filesystem;

template <typename T>
Plane<T> normalize(const Plane<T>& image) {
  Plane<T> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<T>((static_cast<double>(image[i]) - kNormMean) / kNormStd);
  }
  return out;
}

template <typename T>
Plane<T> denormalize(const Plane<T>& image) {
  Plane<T> out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(image[i]) * kNormStd + kNormMean);
  }
  return out;
}

template Plane<float> normalize(const Plane<float>&);
template Plane<double> normalize(const Plane<double>&);
template Plane<float> denormalize(const Plane<float>&);
template Plane<double> denormalize(const Plane<double>&);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

template <typename T>
Plane<T> crop_flip(const Plane<T>& src, int top, int left, int size, bool hflip, bool vflip) {
  Plane<T> out(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const int sr = top + (vflip ? size - 1 - r : r);
      const int sc = left + (hflip ? size - 1 - c : c);
      out(r, c) = src(sr, sc);
    }
  }
  return out;
}

GroundTruthMask resize_mask(const GroundTruthMask& mask, int height, int width) {
  if (mask.height() == height && mask.width() == width) return mask;
  GrayImage soft(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) soft[i] = mask[i];
  const GrayImage resized = resize(soft, height, width);
  GroundTruthMask out(height, width);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = resized[i] >= 0.5F ? 1 : 0;
  return out;
}

}  // namespace

Sample train_transform(const Sample& sample, const AugmentConfig& config, std::uint64_t seed) {
  if (config.crop > config.resize || config.crop <= 0) {
    throw ConfigError("crop " + std::to_string(config.crop) + " must lie in [1, resize=" +
                      std::to_string(config.resize) + "]");
  }
  if (!sample.image.same_extent(sample.mask)) throw ShapeError("sample " + sample.name + ": image/mask extents differ");
  const GrayImage image = sample.image.height() == config.resize && sample.image.width() == config.resize
                              ? sample.image
                              : resize(sample.image, config.resize, config.resize);
  const GroundTruthMask mask = resize_mask(sample.mask, config.resize, config.resize);

  Rng rng(seed);
  std::uniform_int_distribution<int> offset(0, config.resize - config.crop);
  const int top = offset(rng);
  const int left = offset(rng);
  std::bernoulli_distribution coin(0.5);
  const bool h = coin(rng) && config.hflip;
  const bool v = coin(rng) && config.vflip;

  Sample out;
  out.name = sample.name;
  out.image = crop_flip(image, top, left, config.crop, h, v);
  const Gray8 m = crop_flip<std::uint8_t>(mask, top, left, config.crop, h, v);
  out.mask = GroundTruthMask(m.height(), m.width(), std::vector<std::uint8_t>(m.values().begin(), m.values().end()));
  return out;
}

GrayImage salt_pepper(const GrayImage& image, double rho, std::uint64_t seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("salt-and-pepper rho must lie in [0,1]");
  GrayImage out = image;
  const std::size_t n = image.size();
  const auto count = static_cast<std::size_t>(std::floor(rho * static_cast<double>(n)));
  if (count == 0) return out;
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  Rng rng(seed);
  // partial Fisher-Yates: the first `count` entries become a uniform subset
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  const std::size_t salt = count / 2;
  for (std::size_t i = 0; i < count; ++i) out[index[i]] = i < salt ? 1.0F : 0.0F;
  return out;
}

GroundTruthMask binarize_gt(const Gray8& mask_image) {
  if (mask_image.size() == 0) throw DataError("empty ground-truth image");
  const std::uint8_t peak = *std::max_element(mask_image.values().begin(), mask_image.values().end());
  GroundTruthMask out(mask_image.height(), mask_image.width());
  if (peak == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2 * static_cast<int>(mask_image[i]) >= peak ? 1 : 0;
  return out;
}

std::vector<Sample> load_dataset(const fs::path& root) {
  const fs::path images = root / "images";
  const fs::path masks = root / "masks";
  if (!fs::is_directory(images)) throw DataError("dataset " + root.string() + " has no images/ directory");
  if (!fs::is_directory(masks)) throw DataError("dataset " + root.string() + " has no masks/ directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("dataset " + root.string() + " is empty (no images/*.png)");
  std::vector<Sample> out;
  out.reserve(files.size());
  for (const auto& file : files) {
    const fs::path mask_path = masks / (file.stem().string() + ".png");
    if (!fs::exists(mask_path)) throw DataError("no mask for " + file.string() + " (expected " + mask_path.string() + ")");
    Sample s;
    s.name = file.stem().string();
    s.image = to_unit(read_png_gray(file));
    s.mask = binarize_gt(read_png_gray(mask_path));
    if (!s.image.same_extent(s.mask)) throw DataError("image and mask extents differ for " + file.string());
    out.push_back(std::move(s));
  }
  return out;
}

void write_samples(const fs::path& root, std::span<const Sample> samples) {
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  if (!fs::is_directory(root / "images") || !fs::is_directory(root / "masks")) {
    throw DataError("cannot create dataset directories under " + root.string());
  }
  for (const auto& s : samples) {
    write_png_gray(root / "images" / (s.name + ".png"), quantize(s.image));
    write_png_gray(root / "masks" / (s.name + ".png"), mask_to_gray8(s.mask));
  }
}

Tensor<float> image_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("empty batch");
  const int h = samples.front().image.height();
  const int w = samples.front().image.width();
  Tensor<float> out(Shape{static_cast<int>(samples.size()), 1, h, w});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].image.height() != h || samples[n].image.width() != w) throw ShapeError("ragged image batch");
    const GrayImage norm = normalize(samples[n].image);
    std::copy(norm.values().begin(), norm.values().end(), out.plane(static_cast<int>(n), 0));
  }
  return out;
}

Tensor<float> mask_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw DataError("empty batch");
  const int h = samples.front().mask.height();
  const int w = samples.front().mask.width();
  Tensor<float> out(Shape{static_cast<int>(samples.size()), 1, h, w});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].mask.height() != h || samples[n].mask.width() != w) throw ShapeError("ragged mask batch");
    float* dst = out.plane(static_cast<int>(n), 0);
    for (std::size_t i = 0; i < samples[n].mask.size(); ++i) dst[i] = samples[n].mask[i];
  }
  return out;
}

}  // namespace jaffnet
