#include "jaffnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

#include "jaffnet/errors.hpp"
#include "jaffnet/layers.hpp"

namespace jaffnet {

namespace {

constexpr double kMinFraction = 0.001;
constexpr double kMaxFraction = 0.30;
constexpr double kMaxOffset = 0.45;

enum Stream : std::uint64_t { geometry = 1, appearance = 2, noise = 3 };

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Box-filtered Gaussian noise normalized to unit standard deviation.
std::vector<double> smooth_noise(int size, int radius, Rng& rng) {
  std::normal_distribution<double> gauss;
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> a(n), b(n);
  for (auto& v : a) v = gauss(rng);
  for (int pass = 0; pass < 3; ++pass) {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) s += a[static_cast<std::size_t>(r) * size + std::clamp(c + k, 0, size - 1)];
        b[static_cast<std::size_t>(r) * size + c] = s;
      }
    }
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        double s = 0;
        for (int k = -radius; k <= radius; ++k) s += b[static_cast<std::size_t>(std::clamp(r + k, 0, size - 1)) * size + c];
        a[static_cast<std::size_t>(r) * size + c] = s;
      }
    }
  }
  double mean = 0, var = 0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(n);
  for (double v : a) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n)) + 1e-12;
  for (auto& v : a) v = (v - mean) / sd;
  return a;
}

void draw_scratch(GroundTruthMask& mask, Rng& rng) {
  const int s = mask.height();
  const double half_width = uniform(rng, 0.6, 1.6);
  double x = uniform(rng, 0.15 * s, 0.85 * s);
  double y = uniform(rng, 0.15 * s, 0.85 * s);
  double heading = uniform(rng, 0.0, 2 * std::numbers::pi);
  const double length = uniform(rng, 0.3 * s, 0.7 * s);
  const int segments = std::uniform_int_distribution<int>(3, 5)(rng);
  const double seg_len = length / segments;
  for (int k = 0; k < segments; ++k) {
    heading += uniform(rng, -0.6, 0.6);
    const int steps = static_cast<int>(std::ceil(seg_len * 2));
    for (int t = 0; t < steps; ++t) {
      x += 0.5 * std::cos(heading);
      y += 0.5 * std::sin(heading);
      const int r0 = static_cast<int>(std::floor(y - half_width));
      const int c0 = static_cast<int>(std::floor(x - half_width));
      for (int r = r0; r <= r0 + static_cast<int>(std::ceil(2 * half_width)) + 1; ++r) {
        for (int c = c0; c <= c0 + static_cast<int>(std::ceil(2 * half_width)) + 1; ++c) {
          if (r < 0 || c < 0 || r >= s || c >= s) continue;
          const double dy = r - y;
          const double dx = c - x;
          if (dx * dx + dy * dy <= half_width * half_width) mask(r, c) = 1;
        }
      }
    }
  }
}

void draw_patch(GroundTruthMask& mask, Rng& rng) {
  const int s = mask.height();
  const double radius = uniform(rng, 0.08 * s, 0.2 * s);
  const double cy = uniform(rng, radius, s - radius);
  const double cx = uniform(rng, radius, s - radius);
  const std::vector<double> noise = smooth_noise(s, std::max(1, s / 32), rng);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
      const double field = std::exp(-d2 / (2 * radius * radius)) + 0.15 * noise[static_cast<std::size_t>(r) * s + c];
      if (field > 0.6) mask(r, c) = 1;
    }
  }
}

void draw_inclusions(GroundTruthMask& mask, Rng& rng) {
  const int s = mask.height();
  const int count = std::uniform_int_distribution<int>(1, 4)(rng);
  const double max_axis = 1.5 + 0.06 * s;
  for (int k = 0; k < count; ++k) {
    const double a = uniform(rng, 1.5, max_axis);
    const double b = uniform(rng, 1.5, max_axis);
    const double theta = uniform(rng, 0.0, std::numbers::pi);
    const double cy = uniform(rng, max_axis, s - max_axis);
    const double cx = uniform(rng, max_axis, s - max_axis);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int r = 0; r < s; ++r) {
      for (int c = 0; c < s; ++c) {
        const double u = (c - cx) * ct + (r - cy) * st;
        const double v = -(c - cx) * st + (r - cy) * ct;
        if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) mask(r, c) = 1;
      }
    }
  }
}

GroundTruthMask draw_geometry(const SynthSpec& spec) {
  const int s = spec.image_size;
  GroundTruthMask mask(s, s);
  if (spec.defect_kind == DefectKind::none) return mask;
  Rng rng(mix_seed(spec.seed, Stream::geometry));
  for (int attempt = 0; attempt < 100; ++attempt) {
    mask = GroundTruthMask(s, s);
    switch (spec.defect_kind) {
      case DefectKind::scratch: draw_scratch(mask, rng); break;
      case DefectKind::patch: draw_patch(mask, rng); break;
      case DefectKind::inclusion: draw_inclusions(mask, rng); break;
      case DefectKind::none: break;
    }
    const double fraction = static_cast<double>(mask.foreground()) / static_cast<double>(mask.size());
    if (fraction >= kMinFraction && fraction <= kMaxFraction) return mask;
  }
  throw DataError("synthetic generator could not place a defect for seed " + std::to_string(spec.seed));
}

GrayImage draw_background(const SynthSpec& spec, Rng& rng) {
  const int s = spec.image_size;
  GrayImage image(s, s);
  const double base = uniform(rng, 0.35, 0.65);
  std::normal_distribution<double> grain(0.0, 0.02);
  switch (spec.background) {
    case Background::flat:
      for (auto& v : image.values()) v = static_cast<float>(base + grain(rng));
      break;
    case Background::grating: {
      const double period = uniform(rng, 6.0, 16.0);
      const double angle = uniform(rng, 0.0, std::numbers::pi);
      const double phase = uniform(rng, 0.0, 2 * std::numbers::pi);
      for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
          const double t = (c * std::cos(angle) + r * std::sin(angle)) * 2 * std::numbers::pi / period + phase;
          image(r, c) = static_cast<float>(base + 0.08 * std::sin(t) + grain(rng));
        }
      }
      break;
    }
    case Background::blobs: {
      const std::vector<double> field = smooth_noise(s, std::max(1, s / 16), rng);
      for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<float>(base + 0.07 * field[i] + grain(rng));
      break;
    }
  }
  return image;
}

}  // namespace

std::string to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::scratch: return "scratch";
    case DefectKind::patch: return "patch";
    case DefectKind::inclusion: return "inclusion";
    case DefectKind::none: return "none";
  }
  return "none";
}

std::string to_string(Background background) {
  switch (background) {
    case Background::flat: return "flat";
    case Background::grating: return "grating";
    case Background::blobs: return "blobs";
  }
  return "flat";
}

DefectKind parse_defect_kind(std::string_view text) {
  for (auto k : {DefectKind::scratch, DefectKind::patch, DefectKind::inclusion, DefectKind::none}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown defect kind '" + std::string(text) + "' (scratch, patch, inclusion, none)");
}

Background parse_background(std::string_view text) {
  for (auto b : {Background::flat, Background::grating, Background::blobs}) {
    if (to_string(b) == text) return b;
  }
  throw ConfigError("unknown background '" + std::string(text) + "' (flat, grating, blobs)");
}

void SynthSpec::validate() const {
  if (image_size < 16) throw ConfigError("synth image_size must be at least 16");
  if (!(contrast > 0.0 && contrast <= 1.0)) throw ConfigError("synth contrast must lie in (0,1]");
  if (!(noise_rho >= 0.0 && noise_rho <= 1.0)) throw ConfigError("synth noise_rho must lie in [0,1]");
}

Sample synth_generate(const SynthSpec& spec, std::string name) {
  spec.validate();
  Sample out;
  out.name = std::move(name);
  out.mask = draw_geometry(spec);
  Rng rng(mix_seed(spec.seed, Stream::appearance));
  out.image = draw_background(spec, rng);
  // mostly dark defects, as with pits and scratches on metal
  const double sign = std::bernoulli_distribution(0.7)(rng) ? -1.0 : 1.0;
  const double offset = sign * kMaxOffset * spec.contrast;
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    const double v = out.image[i] + (out.mask[i] ? offset : 0.0);
    out.image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  if (spec.noise_rho > 0) out.image = salt_pepper(out.image, spec.noise_rho, mix_seed(spec.seed, Stream::noise));
  return out;
}

std::vector<SynthSpec> synth_specs(const SynthDatasetOptions& options) {
  if (options.count < 1) throw ConfigError("synth count must be at least 1");
  constexpr DefectKind kKinds[] = {DefectKind::scratch, DefectKind::patch, DefectKind::inclusion};
  constexpr Background kBackgrounds[] = {Background::flat, Background::grating, Background::blobs};
  std::vector<SynthSpec> specs;
  for (int i = 0; i < options.count; ++i) {
    SynthSpec s;
    s.image_size = options.image_size;
    s.defect_kind = options.defect_kind.value_or(kKinds[i % 3]);
    s.background = options.background.value_or(kBackgrounds[(i / 3) % 3]);
    s.contrast = options.contrast;
    s.noise_rho = options.noise_rho;
    s.seed = options.seed + static_cast<std::uint64_t>(i);
    s.validate();
    specs.push_back(s);
  }
  return specs;
}

namespace {
std::string item_name(int i) {
  std::string digits = std::to_string(i);
  return "synth_" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}
}  // namespace

std::vector<Sample> synth_dataset(const SynthDatasetOptions& options) {
  const auto specs = synth_specs(options);
  std::vector<Sample> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back(synth_generate(specs[i], item_name(static_cast<int>(i))));
  return out;
}

void write_synth_dataset(const std::filesystem::path& root, const SynthDatasetOptions& options) {
  const auto specs = synth_specs(options);
  const auto samples = synth_dataset(options);
  write_samples(root, samples);
  nlohmann::ordered_json manifest;
  manifest["format"] = "jaffnet-synth";
  manifest["version"] = 1;
  auto& items = manifest["samples"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    items.push_back({{"name", samples[i].name},
                     {"image_size", s.image_size},
                     {"defect_kind", to_string(s.defect_kind)},
                     {"contrast", s.contrast},
                     {"background", to_string(s.background)},
                     {"noise_rho", s.noise_rho},
                     {"seed", s.seed}});
  }
  std::ofstream out(root / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace jaffnet
