#include "jaffnet/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace fs = std::filesystem;

namespace {

enum Stream : std::uint64_t { shuffle = 0x51, augment = 0x52, corrupt = 0x53 };

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string loss_csv_header() {
  std::string h = "step";
  for (int k = 0; k < kSideOutputs; ++k) {
    const std::string s = std::to_string(k);
    h += ",bce_" + s + ",iou_" + s + ",ssim_" + s;
  }
  return h + ",total";
}

std::string loss_csv_row(std::int64_t step, const LossBreakdown& losses) {
  std::string row = std::to_string(step);
  for (const auto& t : losses.per_output) {
    row += "," + format_value(t.bce) + "," + format_value(t.iou) + "," + format_value(t.ssim);
  }
  return row + "," + format_value(losses.total);
}

std::vector<std::size_t> batch_indices(std::size_t dataset_size, int batch_size, std::uint64_t seed,
                                       std::int64_t step) {
  if (dataset_size == 0) throw DataError("empty dataset");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  const auto b = static_cast<std::size_t>(batch_size);
  const std::size_t per_epoch = (dataset_size + b - 1) / b;
  const auto epoch = static_cast<std::uint64_t>(step) / per_epoch;
  const std::size_t within = static_cast<std::size_t>(step) % per_epoch;
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed, Stream::shuffle), epoch));
  for (std::size_t i = dataset_size - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  const std::size_t begin = within * b;
  const std::size_t end = std::min(dataset_size, begin + b);
  return {order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::int64_t planned_steps(const TrainingConfig& training, std::size_t dataset_size) {
  if (training.epochs > 0) {
    const auto b = static_cast<std::size_t>(training.batch_size);
    return static_cast<std::int64_t>(training.epochs) * static_cast<std::int64_t>((dataset_size + b - 1) / b);
  }
  return training.steps;
}

Trainer::Trainer(RunConfig config, std::vector<Sample> data) : config_(std::move(config)), data_(std::move(data)) {
  config_.validate();
  if (data_.empty()) throw DataError("training dataset is empty");
  if (config_.training.train_noise_rho > 0) {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      data_[i].image = salt_pepper(data_[i].image, config_.training.train_noise_rho,
                                   mix_seed(mix_seed(config_.training.seed, Stream::corrupt), i));
    }
  }
  model_ = std::make_unique<JaffNet<float>>(config_.network, config_.training.seed);
  const auto& t = config_.training;
  optimizer_ = std::make_unique<Adam<float>>(model_->params(), AdamConfig{t.learning_rate, t.beta1, t.beta2, t.adam_eps});
  loss_options_ = LossOptions::from(config_);
}

void Trainer::resume(const Checkpoint& checkpoint) {
  require_compatible(checkpoint.config, config_);
  restore_model(checkpoint, *model_);
  restore_optimizer(checkpoint, *optimizer_);
  completed_ = checkpoint.step;
}

LossBreakdown Trainer::step(std::span<const std::size_t> indices) {
  const auto& t = config_.training;
  const AugmentConfig aug{t.resize, t.crop, t.hflip, t.vflip};
  std::vector<Sample> batch;
  batch.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::uint64_t seed = mix_seed(mix_seed(mix_seed(t.seed, Stream::augment), static_cast<std::uint64_t>(completed_)), j);
    batch.push_back(train_transform(data_[indices[j]], aug, seed));
  }
  const Tensor<float> images = image_batch(batch);
  const Tensor<float> masks = mask_batch(batch);
  const auto output = (*model_)(Var<float>::constant(images), Mode::train);
  auto loss = total_loss(output, masks, loss_options_);
  backward(loss.total);
  optimizer_->step();
  optimizer_->zero_grad();
  ++completed_;
  return loss.breakdown;
}

TrainResult Trainer::run(const fs::path& out_dir,
                         const std::function<void(std::int64_t, const LossBreakdown&)>& on_step) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw DataError("cannot create output directory " + out_dir.string());
  TrainResult result;
  result.loss_csv = out_dir / "losses.csv";
  result.final_checkpoint = out_dir / "model.ckpt";
  const bool fresh = completed_ == 0;
  std::ofstream csv(result.loss_csv, fresh ? std::ios::trunc : std::ios::app);
  if (!csv) throw DataError("output directory " + out_dir.string() + " is not writable");
  if (fresh) csv << loss_csv_header() << '\n';

  const auto& t = config_.training;
  const std::int64_t total = planned_steps(t, data_.size());
  while (completed_ < total) {
    const auto indices = batch_indices(data_.size(), t.batch_size, t.seed, completed_);
    const LossBreakdown losses = step(indices);
    csv << loss_csv_row(completed_, losses) << '\n';
    csv.flush();
    result.history.push_back(losses);
    if (on_step) on_step(completed_, losses);
    if (t.checkpoint_every > 0 && completed_ % t.checkpoint_every == 0 && completed_ < total) {
      save_checkpoint(out_dir / ("checkpoint_" + std::to_string(completed_) + ".ckpt"), *model_, config_, completed_,
                      optimizer_.get());
    }
  }
  save_checkpoint(result.final_checkpoint, *model_, config_, completed_, optimizer_.get());
  result.steps = completed_;
  return result;
}

std::vector<SaliencyMap> predict(const JaffNet<float>& model, std::span<const GrayImage> images, int size,
                                 int batch_size) {
  if (size % 16 != 0 || size <= 0) throw ConfigError("inference size must be a positive multiple of 16");
  NoGradGuard guard;
  std::vector<SaliencyMap> out;
  out.reserve(images.size());
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(images.size(), begin + static_cast<std::size_t>(batch_size));
    Tensor<float> batch(Shape{static_cast<int>(end - begin), 1, size, size});
    for (std::size_t i = begin; i < end; ++i) {
      const GrayImage& src = images[i];
      const GrayImage scaled = src.height() == size && src.width() == size ? src : resize(src, size, size);
      const GrayImage norm = normalize(scaled);
      std::copy(norm.values().begin(), norm.values().end(), batch.plane(static_cast<int>(i - begin), 0));
    }
    const auto result = model(Var<float>::constant(batch), Mode::eval);
    const Tensor<float>& final = result.final.value();
    for (std::size_t i = begin; i < end; ++i) {
      const float* p = final.plane(static_cast<int>(i - begin), 0);
      std::vector<double> values(p, p + static_cast<std::ptrdiff_t>(size) * size);
      for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
      SaliencyMap map(size, size, std::move(values));
      const GrayImage& src = images[i];
      out.push_back(src.height() == size && src.width() == size ? map : resize(map, src.height(), src.width()));
    }
  }
  return out;
}

SaliencyMap predict(const JaffNet<float>& model, const GrayImage& image, int size) {
  return predict(model, std::span<const GrayImage>(&image, 1), size).front();
}

}  // namespace jaffnet
