#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "jaffnet/checkpoint.hpp"
#include "jaffnet/data.hpp"
#include "jaffnet/losses.hpp"
#include "jaffnet/network.hpp"
#include "jaffnet/optimizer.hpp"

namespace jaffnet {

/// Header of the loss CSV: step, then bce/iou/ssim per side output, then total.
std::string loss_csv_header();
std::string loss_csv_row(std::int64_t step, const LossBreakdown& losses);

/// Indices of the samples in (0-based) step `step`: per-epoch seeded
/// permutations cut into consecutive batches; the last batch of an epoch may be short.
std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::uint64_t seed, std::int64_t step);

/// Total steps implied by the config: epochs * ceil(N / batch) when epochs > 0, else `steps`.
std::int64_t planned_steps(const TrainingConfig& training, std::size_t dataset_size);

struct TrainResult {
  std::int64_t steps = 0;
  std::vector<LossBreakdown> history;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
};

/// Single-process deterministic training loop. Every byte of the output is a
/// function of (config, seed, data).
class Trainer {
 public:
  /// Throws ConfigError for an invalid config and DataError for an empty dataset.
  Trainer(RunConfig config, std::vector<Sample> data);

  /// Continues from a checkpoint written by a compatible run.
  void resume(const Checkpoint& checkpoint);

  /// Trains to the planned step count. Writes out_dir/losses.csv (truncated
  /// on a fresh run, appended on resume), periodic checkpoints
  /// out_dir/checkpoint_<step>.ckpt and the final out_dir/model.ckpt.
  TrainResult run(const std::filesystem::path& out_dir,
                  const std::function<void(std::int64_t, const LossBreakdown&)>& on_step = {});

  /// One optimization step on the given batch indices.
  LossBreakdown step(std::span<const std::size_t> indices);

  JaffNet<float>& model() { return *model_; }
  [[nodiscard]] const RunConfig& config() const { return config_; }
  [[nodiscard]] std::int64_t completed_steps() const { return completed_; }
  [[nodiscard]] const std::vector<Sample>& data() const { return data_; }

 private:
  RunConfig config_;
  std::vector<Sample> data_;
  std::unique_ptr<JaffNet<float>> model_;
  std::unique_ptr<Adam<float>> optimizer_;
  LossOptions loss_options_;
  std::int64_t completed_ = 0;
};

/// Resize to size x size, normalize, eval-mode forward, bilinear rescale to
/// the original extent. Returns the final side output.
SaliencyMap predict(const JaffNet<float>& model, const GrayImage& image, int size);
std::vector<SaliencyMap> predict(const JaffNet<float>& model, std::span<const GrayImage> images, int size,
                                 int batch_size = 8);

}  // namespace jaffnet
