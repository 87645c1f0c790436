#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jaffnet/data.hpp"

namespace jaffnet {

enum class DefectKind { scratch, patch, inclusion, none };
enum class Background { flat, grating, blobs };

std::string to_string(DefectKind kind);
std::string to_string(Background background);
DefectKind parse_defect_kind(std::string_view text);
Background parse_background(std::string_view text);

/// One synthetic surface image. Geometry depends only on (kind, size, seed),
/// so changing contrast or background never changes the mask.
struct SynthSpec {
  int image_size = 64;
  DefectKind defect_kind = DefectKind::scratch;
  /// Scales the defect's gray offset, in (0,1].
  double contrast = 1.0;
  Background background = Background::flat;
  double noise_rho = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

Sample synth_generate(const SynthSpec& spec, std::string name = "synth");

/// Dataset recipe: item i uses seed + i. Unset kind/background cycle through
/// every defect kind and background texture.
struct SynthDatasetOptions {
  int count = 8;
  int image_size = 64;
  std::optional<DefectKind> defect_kind;
  std::optional<Background> background;
  double contrast = 1.0;
  double noise_rho = 0.0;
  std::uint64_t seed = 0;
};

std::vector<SynthSpec> synth_specs(const SynthDatasetOptions& options);
std::vector<Sample> synth_dataset(const SynthDatasetOptions& options);

/// Writes the images/masks layout plus manifest.json listing every spec.
void write_synth_dataset(const std::filesystem::path& root, const SynthDatasetOptions& options);

}  // namespace jaffnet
