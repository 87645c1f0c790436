#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace jaffnet {

/// Number of deeply supervised side outputs (DRF stage plus four decode stages).
inline constexpr int kSideOutputs = 5;

struct NetworkConfig {
  int base_width = 64;
  int input_channels = 1;
  std::array<int, 3> mrf_rates{1, 2, 4};
  std::array<int, 4> decoder_widths{256, 128, 64, 64};
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  bool use_jaff = true;
  /// When false the context stage is two basic blocks instead of DRF.
  bool use_drf = true;

  /// Encoder stage widths (E1..E5).
  [[nodiscard]] std::array<int, 5> encoder_channels() const;
  /// Decode-stage output widths scaled by base_width / 64.
  [[nodiscard]] std::array<int, 4> scaled_decoder_widths() const;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

struct TrainingConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  /// Zero means step-bounded training.
  int epochs = 0;
  int steps = 500;
  std::uint64_t seed = 0;
  bool loss_bce = true;
  bool loss_iou = true;
  bool loss_ssim = true;
  bool deep_supervision = true;
  int resize = 256;
  int crop = 224;
  bool hflip = true;
  bool vflip = true;
  /// Salt-and-pepper fraction applied to training images at load time.
  double train_noise_rho = 0.0;
  int infer_size = 256;
  /// Zero disables periodic checkpoints; the final checkpoint is always written.
  int checkpoint_every = 0;
};

struct RunConfig {
  NetworkConfig network;
  TrainingConfig training;

  void validate() const;

  /// Canonical key=value text, one key per line in sorted order.
  [[nodiscard]] std::string to_text() const;
  /// Key=value map of every network field (used for compatibility checks).
  [[nodiscard]] std::map<std::string, std::string> network_fields() const;
  [[nodiscard]] std::uint64_t network_hash() const;
};

/// Parses flat UTF-8 key=value lines with '#' comments. Unknown keys,
/// malformed values, and failed validation throw ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies one key=value assignment on top of an existing config.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Named presets: dataset schedules ("sd900", "mtile", "dagm") and
/// ablations ("wo_jaff", "wo_drf", "wo_dp", "bce_only", "desk").
void apply_preset(RunConfig& config, std::string_view name);
std::vector<std::string> preset_names();

/// Differing network fields between two configs, formatted "key: a != b".
std::vector<std::string> network_differences(const RunConfig& a, const RunConfig& b);

}  // namespace jaffnet
