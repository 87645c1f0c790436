#include "jaffnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace {

constexpr double kMachineEps = std::numeric_limits<double>::epsilon();
constexpr double kAlignmentEps = 1e-12;

void require_same(const SaliencyMap& p, const GroundTruthMask& g, const char* what) {
  if (!p.same_extent(g)) {
    throw ShapeError(std::string(what) + ": prediction " + std::to_string(p.height()) + "x" +
                     std::to_string(p.width()) + " vs ground truth " + std::to_string(g.height()) + "x" +
                     std::to_string(g.width()));
  }
}

double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Highest threshold index i with P >= i/255, or -1.
int threshold_index(double p) {
  int i = std::clamp(static_cast<int>(std::floor(p * (kThresholds - 1))), -1, kThresholds - 1);
  while (i + 1 < kThresholds && p >= static_cast<double>(i + 1) / (kThresholds - 1)) ++i;
  while (i >= 0 && p < static_cast<double>(i) / (kThresholds - 1)) --i;
  return i;
}

// Normalized 1-D Gaussian; the 2-D kernel is its outer product.
std::vector<double> gaussian_taps(int size, double sigma) {
  std::vector<double> g(size);
  const double c = (size - 1) / 2.0;
  double s = 0;
  for (int i = 0; i < size; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Same-size correlation with zero padding, separable.
std::vector<double> filter_zero_padded(const std::vector<double>& src, int height, int width,
                                       const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < width) acc += taps[k + r] * src[static_cast<std::size_t>(y) * width + xx];
      }
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < height) acc += taps[k + r] * tmp[static_cast<std::size_t>(yy) * width + x];
      }
      out[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

// Structural similarity of one region as used by the region term of S-measure.
double region_ssim(const SaliencyMap& p, const GroundTruthMask& g, int r0, int r1, int c0, int c1) {
  const int rows = r1 - r0;
  const int cols = c1 - c0;
  if (rows <= 0 || cols <= 0) return 0.0;
  const double n = static_cast<double>(rows) * cols;
  double mx = 0, my = 0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      mx += p(r, c);
      my += g(r, c);
    }
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const double dx = p(r, c) - mx;
      const double dy = g(r, c) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  const double denom = n - 1 + kMachineEps;
  sxx /= denom;
  syy /= denom;
  sxy /= denom;
  const double alpha = 4 * mx * my * sxy;
  const double beta = (mx * mx + my * my) * (sxx + syy);
  if (alpha != 0) return alpha / (beta + kMachineEps);
  if (beta == 0) return 1.0;
  return 0.0;
}

// Object similarity of the values selected inside one region.
double object_similarity(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double m = mean_of(values);
  double var = 0;
  for (double v : values) var += (v - m) * (v - m);
  const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  return 2.0 * m / (m * m + 1.0 + sd + kMachineEps);
}

// Distance to the nearest foreground pixel and the mean error over all
// foreground pixels at that distance.
struct NearestField {
  std::vector<double> distance;
  std::vector<double> error;
};

NearestField nearest_foreground_error(const GroundTruthMask& truth, const std::vector<double>& error) {
  const int h = truth.height();
  const int w = truth.width();
  constexpr int kNone = std::numeric_limits<int>::max();
  std::vector<int> above(static_cast<std::size_t>(h) * w, kNone), below(above.size(), kNone);
  for (int c = 0; c < w; ++c) {
    int last = kNone;
    for (int r = 0; r < h; ++r) {
      if (truth(r, c)) last = r;
      above[static_cast<std::size_t>(r) * w + c] = last;
    }
    last = kNone;
    for (int r = h - 1; r >= 0; --r) {
      if (truth(r, c)) last = r;
      below[static_cast<std::size_t>(r) * w + c] = last;
    }
  }
  NearestField f;
  f.distance.assign(above.size(), std::numeric_limits<double>::infinity());
  f.error.assign(above.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      long best = std::numeric_limits<long>::max();
      double sum = 0;
      int count = 0;
      for (int cc = 0; cc < w; ++cc) {
        const std::size_t k = static_cast<std::size_t>(r) * w + cc;
        const int up = above[k];
        const int down = below[k];
        int rows[2];
        int m = 0;
        if (up != kNone && (down == kNone || r - up <= down - r)) rows[m++] = up;
        if (down != kNone && down != up && (up == kNone || down - r <= r - up)) rows[m++] = down;
        for (int j = 0; j < m; ++j) {
          const long d2 = static_cast<long>(c - cc) * (c - cc) + static_cast<long>(r - rows[j]) * (r - rows[j]);
          const double e = error[static_cast<std::size_t>(rows[j]) * w + cc];
          if (d2 < best) {
            best = d2;
            sum = e;
            count = 1;
          } else if (d2 == best) {
            sum += e;
            ++count;
          }
        }
      }
      if (count > 0) {
        f.distance[static_cast<std::size_t>(r) * w + c] = std::sqrt(static_cast<double>(best));
        f.error[static_cast<std::size_t>(r) * w + c] = sum / count;
      }
    }
  }
  return f;
}

}  // namespace

double mae(const SaliencyMap& prediction, const GroundTruthMask& truth) {
  require_same(prediction, truth, "mae");
  double s = 0;
  for (std::size_t i = 0; i < prediction.size(); ++i) s += std::abs(prediction[i] - truth[i]);
  return s / static_cast<double>(prediction.size());
}

double f_measure(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  return denom > 0 ? (1 + beta2) * precision * recall / denom : 0.0;
}

std::optional<PrCurves> pr_and_f_curves(const SaliencyMap& prediction, const GroundTruthMask& truth) {
  require_same(prediction, truth, "pr_and_f_curves");
  const std::size_t positives = truth.foreground();
  if (positives == 0) return std::nullopt;

  std::array<std::size_t, kThresholds> fg_hist{}, bg_hist{};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const int t = threshold_index(prediction[i]);
    if (t < 0) continue;
    (truth[i] ? fg_hist : bg_hist)[t]++;
  }
  PrCurves c;
  std::size_t tp = 0, fp = 0;
  for (int t = kThresholds - 1; t >= 0; --t) {
    tp += fg_hist[t];
    fp += bg_hist[t];
    c.precision[t] = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    c.recall[t] = static_cast<double>(tp) / static_cast<double>(positives);
    c.f_beta[t] = f_measure(c.precision[t], c.recall[t]);
  }
  return c;
}

DistanceTransform distance_to_foreground(const GroundTruthMask& truth) {
  const int h = truth.height();
  const int w = truth.width();
  constexpr int kNone = std::numeric_limits<int>::max();
  // Per column: row of the nearest foreground pixel in that column.
  std::vector<int> nearest_row(static_cast<std::size_t>(h) * w, kNone);
  for (int c = 0; c < w; ++c) {
    int above = kNone;
    for (int r = 0; r < h; ++r) {
      if (truth(r, c)) above = r;
      nearest_row[static_cast<std::size_t>(r) * w + c] = above;
    }
    int below = kNone;
    for (int r = h - 1; r >= 0; --r) {
      if (truth(r, c)) below = r;
      int& best = nearest_row[static_cast<std::size_t>(r) * w + c];
      if (below != kNone && (best == kNone || below - r < r - best)) best = below;
    }
  }
  DistanceTransform dt;
  dt.distance.assign(static_cast<std::size_t>(h) * w, std::numeric_limits<double>::infinity());
  dt.nearest.assign(static_cast<std::size_t>(h) * w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      long best = std::numeric_limits<long>::max();
      std::size_t best_index = 0;
      for (int cc = 0; cc < w; ++cc) {
        const int rr = nearest_row[static_cast<std::size_t>(r) * w + cc];
        if (rr == kNone) continue;
        const long d2 = static_cast<long>(c - cc) * (c - cc) + static_cast<long>(r - rr) * (r - rr);
        if (d2 < best) {
          best = d2;
          best_index = static_cast<std::size_t>(rr) * w + cc;
        }
      }
      if (best != std::numeric_limits<long>::max()) {
        dt.distance[static_cast<std::size_t>(r) * w + c] = std::sqrt(static_cast<double>(best));
        dt.nearest[static_cast<std::size_t>(r) * w + c] = best_index;
      }
    }
  }
  return dt;
}

std::optional<double> weighted_fbeta(const SaliencyMap& prediction, const GroundTruthMask& truth,
                                     const WeightedFConfig& config) {
  require_same(prediction, truth, "weighted_fbeta");
  const std::size_t positives = truth.foreground();
  if (positives == 0) return std::nullopt;
  const int h = truth.height();
  const int w = truth.width();
  const std::size_t n = prediction.size();

  std::vector<double> error(n);
  for (std::size_t i = 0; i < n; ++i) error[i] = std::abs(prediction[i] - truth[i]);

  // Background pixels inherit the mean error of their equidistant nearest
  // foreground pixels before the Gaussian dependency smoothing.
  const NearestField field = nearest_foreground_error(truth, error);
  std::vector<double> propagated(error);
  for (std::size_t i = 0; i < n; ++i) {
    if (!truth[i]) propagated[i] = field.error[i];
  }
  const std::vector<double> smoothed =
      filter_zero_padded(propagated, h, w, gaussian_taps(config.gaussian_size, config.gaussian_sigma));

  double fg_weighted = 0, bg_weighted = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i]) {
      fg_weighted += std::min(error[i], smoothed[i]);
    } else {
      const double importance = 2.0 - std::exp(config.importance_decay * field.distance[i]);
      bg_weighted += error[i] * importance;
    }
  }
  const double tp = static_cast<double>(positives) - fg_weighted;
  const double fp = bg_weighted;
  const double recall = 1.0 - fg_weighted / static_cast<double>(positives);
  const double precision = tp / (kMachineEps + tp + fp);
  return (1 + config.beta2) * recall * precision / (kMachineEps + recall + config.beta2 * precision);
}

StructureTerms structure_terms(const SaliencyMap& prediction, const GroundTruthMask& truth,
                               std::optional<std::pair<int, int>> split) {
  require_same(prediction, truth, "structure_terms");
  const std::size_t n = prediction.size();
  const std::size_t positives = truth.foreground();
  if (positives == 0 || positives == n) throw ShapeError("structure_terms: ground truth is degenerate");

  StructureTerms t;
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i]) {
      fg.push_back(prediction[i]);
    } else {
      bg.push_back(1.0 - prediction[i]);
    }
  }
  const double u = static_cast<double>(positives) / static_cast<double>(n);
  t.object = u * object_similarity(fg) + (1 - u) * object_similarity(bg);

  const int h = truth.height();
  const int w = truth.width();
  if (split) {
    t.split_rows = std::clamp(split->first, 0, h);
    t.split_cols = std::clamp(split->second, 0, w);
  } else {
    double sum_r = 0, sum_c = 0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (truth(r, c)) {
          sum_r += r + 1;
          sum_c += c + 1;
        }
      }
    }
    t.split_cols = static_cast<int>(std::lround(sum_c / static_cast<double>(positives)));
    t.split_rows = static_cast<int>(std::lround(sum_r / static_cast<double>(positives)));
  }
  const int x = t.split_cols;
  const int y = t.split_rows;
  const double area = static_cast<double>(n);
  const double w1 = static_cast<double>(x) * y / area;
  const double w2 = static_cast<double>(w - x) * y / area;
  const double w3 = static_cast<double>(x) * (h - y) / area;
  const double w4 = 1.0 - w1 - w2 - w3;
  t.region = w1 * region_ssim(prediction, truth, 0, y, 0, x) + w2 * region_ssim(prediction, truth, 0, y, x, w) +
             w3 * region_ssim(prediction, truth, y, h, 0, x) + w4 * region_ssim(prediction, truth, y, h, x, w);
  return t;
}

double s_measure(const SaliencyMap& prediction, const GroundTruthMask& truth, const StructureConfig& config) {
  require_same(prediction, truth, "s_measure");
  const std::size_t positives = truth.foreground();
  const double mean_p = mean_of(prediction.values());
  if (positives == 0) return 1.0 - mean_p;
  if (positives == prediction.size()) return mean_p;
  const StructureTerms t = structure_terms(prediction, truth);
  return std::max(0.0, config.lambda * t.object + (1 - config.lambda) * t.region);
}

double e_measure(const SaliencyMap& prediction, const GroundTruthMask& truth) {
  require_same(prediction, truth, "e_measure");
  const std::size_t n = prediction.size();
  const std::size_t positives = truth.foreground();
  const double mean_p = mean_of(prediction.values());
  if (positives == 0) return 1.0 - mean_p;
  if (positives == n) return mean_p;
  const double mean_g = static_cast<double>(positives) / static_cast<double>(n);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double bp = prediction[i] - mean_p;
    const double bg = truth[i] - mean_g;
    const double align = 2 * bg * bp / (bg * bg + bp * bp + kAlignmentEps);
    s += 0.25 * (1 + align) * (1 + align);
  }
  return s / static_cast<double>(n);
}

double ImageMetrics::max_f() const {
  if (!curves) return 0.0;
  return *std::max_element(curves->f_beta.begin(), curves->f_beta.end());
}

ImageMetrics evaluate_image(const SaliencyMap& prediction, const GroundTruthMask& truth) {
  ImageMetrics m;
  m.mae = mae(prediction, truth);
  m.s_m = s_measure(prediction, truth);
  m.e_m = e_measure(prediction, truth);
  m.f_w = weighted_fbeta(prediction, truth);
  m.curves = pr_and_f_curves(prediction, truth);
  return m;
}

MetricReport aggregate(std::span<const ImageMetrics> images) {
  MetricReport r;
  r.images = static_cast<int>(images.size());
  if (images.empty()) return r;
  int counted = 0;
  for (const auto& m : images) {
    r.mae += m.mae;
    r.s_m += m.s_m;
    r.e_m += m.e_m;
    if (m.degenerate()) {
      ++r.degenerate;
      continue;
    }
    ++counted;
    r.f_w += *m.f_w;
    for (int t = 0; t < kThresholds; ++t) {
      r.curves.precision[t] += m.curves->precision[t];
      r.curves.recall[t] += m.curves->recall[t];
      r.curves.f_beta[t] += m.curves->f_beta[t];
    }
  }
  const double n = static_cast<double>(images.size());
  r.mae /= n;
  r.s_m /= n;
  r.e_m /= n;
  if (counted > 0) {
    r.f_w /= counted;
    for (int t = 0; t < kThresholds; ++t) {
      r.curves.precision[t] /= counted;
      r.curves.recall[t] /= counted;
      r.curves.f_beta[t] /= counted;
    }
    r.max_f = *std::max_element(r.curves.f_beta.begin(), r.curves.f_beta.end());
  }
  return r;
}

}  // namespace jaffnet
