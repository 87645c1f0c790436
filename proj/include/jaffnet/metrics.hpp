#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "jaffnet/image.hpp"

namespace jaffnet {

inline constexpr int kThresholds = 256;
/// beta^2 for the PR-derived F-measure curve.
inline constexpr double kCurveBeta2 = 0.3;

struct PrCurves {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> f_beta{};
};

/// Constants of the weighted F-measure, following Margolin et al.
struct WeightedFConfig {
  double beta2 = 1.0;
  double gaussian_sigma = 5.0;
  int gaussian_size = 7;
  /// Background importance: 2 - exp(decay * distance), decay = ln(0.5) / 5.
  double importance_decay = -0.13862943611198905;
};

/// Constants of the structure measure, following Fan et al.
struct StructureConfig {
  double lambda = 0.5;
};

double mae(const SaliencyMap& prediction, const GroundTruthMask& truth);

/// Thresholds i/255 for i = 0..255, foreground where P >= t. An empty
/// prediction has precision 1. Returns nullopt when G has no foreground.
std::optional<PrCurves> pr_and_f_curves(const SaliencyMap& prediction, const GroundTruthMask& truth);

/// F from a precision/recall pair; zero when both vanish.
double f_measure(double precision, double recall, double beta2 = kCurveBeta2);

/// Returns nullopt when G has no foreground.
std::optional<double> weighted_fbeta(const SaliencyMap& prediction, const GroundTruthMask& truth,
                                     const WeightedFConfig& config = {});

/// Object and region terms of the structure measure for a non-degenerate G.
/// The region term splits at the rounded 1-based GT centroid: the top-left
/// quadrant spans `split_rows` rows and `split_cols` columns.
struct StructureTerms {
  double object = 0;
  double region = 0;
  int split_rows = 0;
  int split_cols = 0;
};
/// `split` overrides the centroid split as (rows, cols).
StructureTerms structure_terms(const SaliencyMap& prediction, const GroundTruthMask& truth,
                               std::optional<std::pair<int, int>> split = std::nullopt);

/// All-background G gives 1 - mean(P); all-foreground G gives mean(P).
double s_measure(const SaliencyMap& prediction, const GroundTruthMask& truth, const StructureConfig& config = {});

/// All-background G gives 1 - mean(P); all-foreground G gives mean(P).
double e_measure(const SaliencyMap& prediction, const GroundTruthMask& truth);

/// Exact Euclidean distance to the nearest foreground pixel, and that pixel's
/// linear index. Ties go to the smallest column, then the smallest row.
struct DistanceTransform {
  std::vector<double> distance;
  std::vector<std::size_t> nearest;
};
DistanceTransform distance_to_foreground(const GroundTruthMask& truth);

struct ImageMetrics {
  double mae = 0;
  double s_m = 0;
  double e_m = 0;
  /// Empty for degenerate (all-background) ground truth.
  std::optional<double> f_w;
  std::optional<PrCurves> curves;

  [[nodiscard]] bool degenerate() const { return !curves.has_value(); }
  [[nodiscard]] double max_f() const;
};

ImageMetrics evaluate_image(const SaliencyMap& prediction, const GroundTruthMask& truth);

struct MetricReport {
  double mae = 0;
  double f_w = 0;
  double s_m = 0;
  double e_m = 0;
  PrCurves curves;
  double max_f = 0;
  int images = 0;
  /// Images whose ground truth has no foreground; excluded from f_w and curves.
  int degenerate = 0;
};

/// Averages scalars over images and curves pointwise over non-degenerate images.
MetricReport aggregate(std::span<const ImageMetrics> images);

}  // namespace jaffnet
