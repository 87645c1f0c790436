#pragma once

#include <array>
#include <span>
#include <vector>

#include "jaffnet/autograd.hpp"
#include "jaffnet/config.hpp"

namespace jaffnet {

template <typename T>
struct NetworkOutput;

struct SsimConfig {
  static constexpr double kEps1 = 0.01 * 0.01;
  static constexpr double kEps2 = 0.03 * 0.03;

  int window = 11;
  double sigma = 1.5;

  void validate() const;
  /// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
  [[nodiscard]] std::vector<double> taps() const;
};

inline constexpr double kBceClamp = 1e-7;

/// Per-pixel binary cross entropy averaged over every pixel of the batch.
/// P is clamped to [1e-7, 1 - 1e-7]; the gradient passes straight through the clamp.
template <typename T>
Var<T> bce_loss(const Var<T>& prediction, const Tensor<T>& target);

/// The same value as bce_loss(sigmoid(z), G), with the gradient of the
/// unclamped loss, sigmoid(z) - G, which stays informative for saturated logits.
template <typename T>
Var<T> bce_with_logits(const Var<T>& logits, const Tensor<T>& target);

/// 1 - sum(PG) / sum(P + G - PG) per sample, averaged over the batch.
/// An empty union counts as perfect agreement (loss 0).
template <typename T>
Var<T> iou_loss(const Var<T>& prediction, const Tensor<T>& target);

/// 1 - mean SSIM over all pixel-centred Gaussian-weighted windows
/// (reflection padding), per sample, averaged over the batch.
template <typename T>
Var<T> ssim_loss(const Var<T>& prediction, const Tensor<T>& target, const SsimConfig& config = {});

struct LossTerms {
  double bce = 0;
  double iou = 0;
  double ssim = 0;
};

struct LossBreakdown {
  std::array<LossTerms, kSideOutputs> per_output{};
  /// Which side outputs contribute to the total (all unless deep supervision is off).
  std::array<bool, kSideOutputs> contributes{};
  double total = 0;
};

struct LossOptions {
  bool bce = true;
  bool iou = true;
  bool ssim = true;
  bool deep_supervision = true;
  SsimConfig ssim_config;

  static LossOptions from(const RunConfig& config);
};

template <typename T>
struct LossResult {
  Var<T> total;
  LossBreakdown breakdown;
};

/// Hybrid deep-supervised objective: the sum over side outputs of
/// bce + iou + ssim. Every term is computed for logging; disabled terms and
/// non-contributing outputs are left out of the total.
template <typename T>
LossResult<T> total_loss(std::span<const Var<T>> side_outputs, const Tensor<T>& target, const LossOptions& options = {});

/// With logits given, BCE is taken through bce_with_logits.
template <typename T>
LossResult<T> total_loss(std::span<const Var<T>> side_outputs, std::span<const Var<T>> side_logits,
                         const Tensor<T>& target, const LossOptions& options = {});

/// Uses the output's logits for BCE.
template <typename T>
LossResult<T> total_loss(const NetworkOutput<T>& output, const Tensor<T>& target, const LossOptions& options = {});

}  // namespace jaffnet
