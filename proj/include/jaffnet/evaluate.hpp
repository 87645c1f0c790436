#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jaffnet/metrics.hpp"

namespace jaffnet {

struct EvaluateOptions {
  /// Worker count; 0 reads JAFFNET_THREADS, falling back to the hardware concurrency.
  int threads = 0;
};

struct ImageResult {
  std::string name;
  ImageMetrics metrics;
};

struct DatasetEvaluation {
  MetricReport report;
  /// Sorted by file name.
  std::vector<ImageResult> per_image;
  /// Pairs whose files could not be decoded; they are skipped.
  std::vector<std::string> skipped;
};

/// Pairs pred_dir/*.png with gt_dir/*.png by stem. An unpaired file on
/// either side throws DataError naming it. Predictions are resized to the GT size.
DatasetEvaluation evaluate_dataset(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                   const EvaluateOptions& options = {});

/// Worker count after applying JAFFNET_THREADS.
int evaluator_threads(int requested);

/// report.csv (metric,value), curves.csv (threshold,precision,recall,f) and
/// per_image.csv in out_dir; pr_curve.png too when requested.
void write_evaluation(const std::filesystem::path& out_dir, const DatasetEvaluation& evaluation, bool curve_png);

/// Precision (vertical) versus recall (horizontal) rendered on white.
Gray8 render_pr_curve(const PrCurves& curves, int size = 256);

}  // namespace jaffnet
