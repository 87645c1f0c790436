#include "jaffnet/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "jaffnet/data.hpp"
#include "jaffnet/errors.hpp"

namespace jaffnet {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> png_files(const fs::path& dir, const char* role) {
  if (!fs::is_directory(dir)) throw DataError(std::string(role) + " directory " + dir.string() + " does not exist");
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

int evaluator_threads(int requested) {
  int n = requested;
  if (n <= 0) {
    n = static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("JAFFNET_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(n, cap);
    }
  }
  return std::max(1, n);
}

DatasetEvaluation evaluate_dataset(const fs::path& pred_dir, const fs::path& gt_dir, const EvaluateOptions& options) {
  const auto preds = png_files(pred_dir, "prediction");
  const auto gts = png_files(gt_dir, "ground-truth");
  for (const auto& [stem, path] : preds) {
    if (!gts.contains(stem)) throw DataError("no ground truth for prediction " + path.string());
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.contains(stem)) throw DataError("no prediction for ground truth " + path.string());
  }
  if (gts.empty()) throw DataError("ground-truth directory " + gt_dir.string() + " holds no PNG files");

  std::vector<std::string> names;
  for (const auto& [stem, path] : gts) names.push_back(stem);
  std::vector<std::optional<ImageMetrics>> results(names.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < names.size(); i = next++) {
      try {
        const GroundTruthMask gt = binarize_gt(read_png_gray(gts.at(names[i])));
        SaliencyMap pred = SaliencyMap::from(read_png_gray(preds.at(names[i])));
        if (!pred.same_extent(gt)) pred = resize(pred, gt.height(), gt.width());
        results[i] = evaluate_image(pred, gt);
      } catch (const DataError&) {
        // unreadable pair: reported through `skipped`
      }
    }
  };
  const int threads = std::min<int>(evaluator_threads(options.threads), static_cast<int>(names.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  DatasetEvaluation out;
  std::vector<ImageMetrics> metrics;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!results[i]) {
      out.skipped.push_back(names[i]);
      continue;
    }
    out.per_image.push_back({names[i], *results[i]});
    metrics.push_back(*results[i]);
  }
  if (metrics.empty()) throw DataError("no readable prediction/ground-truth pairs in " + gt_dir.string());
  out.report = aggregate(metrics);
  return out;
}

Gray8 render_pr_curve(const PrCurves& curves, int size) {
  Gray8 img(size, size, 255);
  const int m = size - 1;
  for (int i = 0; i < size; ++i) {
    img(m, i) = 0;
    img(i, 0) = 0;
  }
  auto plot = [&](double r, double p) {
    const int x = static_cast<int>(std::lround(std::clamp(r, 0.0, 1.0) * m));
    const int y = m - static_cast<int>(std::lround(std::clamp(p, 0.0, 1.0) * m));
    img(y, x) = 0;
  };
  for (int t = 0; t + 1 < kThresholds; ++t) {
    // dense interpolation so the curve is connected
    for (int k = 0; k <= 16; ++k) {
      const double a = k / 16.0;
      plot((1 - a) * curves.recall[t] + a * curves.recall[t + 1], (1 - a) * curves.precision[t] + a * curves.precision[t + 1]);
    }
  }
  return img;
}

void write_evaluation(const fs::path& out_dir, const DatasetEvaluation& evaluation, bool curve_png) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const MetricReport& r = evaluation.report;
  std::ofstream report(out_dir / "report.csv", std::ios::trunc);
  if (!report) throw DataError("cannot write " + (out_dir / "report.csv").string());
  report << "metric,value\n"
         << "mae," << fmt(r.mae) << '\n'
         << "f_w," << fmt(r.f_w) << '\n'
         << "s_m," << fmt(r.s_m) << '\n'
         << "e_m," << fmt(r.e_m) << '\n'
         << "max_f," << fmt(r.max_f) << '\n'
         << "images," << r.images << '\n'
         << "degenerate," << r.degenerate << '\n'
         << "skipped," << evaluation.skipped.size() << '\n';

  std::ofstream curves(out_dir / "curves.csv", std::ios::trunc);
  curves << "threshold,precision,recall,f\n";
  for (int t = 0; t < kThresholds; ++t) {
    curves << t << ',' << fmt(r.curves.precision[t]) << ',' << fmt(r.curves.recall[t]) << ','
           << fmt(r.curves.f_beta[t]) << '\n';
  }

  std::ofstream per(out_dir / "per_image.csv", std::ios::trunc);
  per << "name,mae,f_w,s_m,e_m,max_f\n";
  for (const auto& img : evaluation.per_image) {
    const auto& m = img.metrics;
    per << img.name << ',' << fmt(m.mae) << ',' << (m.f_w ? fmt(*m.f_w) : "") << ',' << fmt(m.s_m) << ','
        << fmt(m.e_m) << ',' << (m.degenerate() ? "" : fmt(m.max_f())) << '\n';
  }
  if (curve_png) write_png_gray(out_dir / "pr_curve.png", render_pr_curve(r.curves));
}

}  // namespace jaffnet
