#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jaffnet/config.hpp"
#include "jaffnet/network.hpp"
#include "jaffnet/optimizer.hpp"

namespace jaffnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  /// "parameter", "buffer", "adam_m" or "adam_v".
  std::string kind;
  Tensor<float> value;
  /// Adam per-parameter step count (adam_m only).
  std::int64_t adam_step = 0;
};

/// File layout: 8-byte magic "JAFFCKPT", u32 version, u64 manifest length,
/// UTF-8 JSON manifest, then the little-endian f32 payload in manifest order.
struct Checkpoint {
  RunConfig config;
  std::int64_t step = 0;
  std::int64_t optimizer_steps = 0;
  std::vector<CheckpointTensor> tensors;

  [[nodiscard]] const CheckpointTensor* find(const std::string& name, const std::string& kind) const;
};

Checkpoint make_checkpoint(const JaffNet<float>& model, const RunConfig& config, std::int64_t step,
                           const Adam<float>* optimizer = nullptr);

/// Writes through a temporary file renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
void save_checkpoint(const std::filesystem::path& path, const JaffNet<float>& model, const RunConfig& config,
                     std::int64_t step, const Adam<float>* optimizer = nullptr);

/// Throws CheckpointError on a bad header, corrupt manifest, truncated
/// payload or checksum mismatch (naming the tensor).
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies parameters and buffers into the model. Throws CheckpointError for
/// the first missing tensor or shape mismatch, in model order.
void restore_model(const Checkpoint& checkpoint, JaffNet<float>& model);
void restore_optimizer(const Checkpoint& checkpoint, Adam<float>& optimizer);

/// Throws CheckpointError listing every differing network field.
void require_compatible(const RunConfig& checkpoint_config, const RunConfig& requested);

}  // namespace jaffnet
