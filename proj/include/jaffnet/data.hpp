#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jaffnet/image.hpp"
#include "jaffnet/tensor.hpp"

namespace jaffnet {

inline constexpr double kNormMean = 0.4669;
inline constexpr double kNormStd = 0.2437;

/// Raw gray image in [0,1] with its binary defect mask.
struct Sample {
  std::string name;
  GrayImage image;
  GroundTruthMask mask;
};

/// (I - 0.4669) / 0.2437 elementwise.
template <typename T>
Plane<T> normalize(const Plane<T>& image);
template <typename T>
Plane<T> denormalize(const Plane<T>& image);

struct AugmentConfig {
  int resize = 256;
  int crop = 224;
  bool hflip = true;
  bool vflip = true;
};

/// Resize, random square crop, then independent 50% horizontal and vertical
/// flips. The mask is resized bilinearly and re-binarized at 0.5.
Sample train_transform(const Sample& sample, const AugmentConfig& config, std::uint64_t seed);

/// Overwrites floor(rho*H*W) distinct pixels: half with 1 (salt), the rest with 0.
GrayImage salt_pepper(const GrayImage& image, double rho, std::uint64_t seed);

/// Foreground where v >= 0.5 * max(v); an all-zero image is all background.
GroundTruthMask binarize_gt(const Gray8& mask_image);

/// Reads images/*.png with masks/<same stem>.png, sorted by file name.
std::vector<Sample> load_dataset(const std::filesystem::path& root);

/// Writes images/<name>.png and masks/<name>.png.
void write_samples(const std::filesystem::path& root, std::span<const Sample> samples);

/// Normalized images stacked to N x 1 x H x W.
Tensor<float> image_batch(std::span<const Sample> samples);
Tensor<float> mask_batch(std::span<const Sample> samples);

/// Stateless 64-bit mixing used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace jaffnet
