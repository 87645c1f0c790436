#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "jaffnet/errors.hpp"
#include "jaffnet/evaluate.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace jaffnet {
namespace {

const fs::path kFixture = fs::path(JAFFNET_FIXTURES) / "eval3";

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("jaffnet_test_evaluate_" + name);
  fs::remove_all(p);
  fs::create_directories(p / "pred");
  fs::create_directories(p / "gt");
  return p;
}

struct Expected {
  double mae, f_w, s_m, e_m, max_f;
};

std::map<std::string, Expected> read_expected() {
  std::ifstream in(kFixture / "expected.csv");
  std::map<std::string, Expected> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string name, cell;
    std::getline(ss, name, ',');
    double v[5];
    for (double& x : v) {
      std::getline(ss, cell, ',');
      x = std::stod(cell);
    }
    out[name] = {v[0], v[1], v[2], v[3], v[4]};
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(EvaluateDataset, MatchesPrecomputedFixture) {
  const auto expected = read_expected();
  ASSERT_EQ(expected.size(), 4U);
  const auto ev = evaluate_dataset(kFixture / "pred", kFixture / "gt");
  ASSERT_EQ(ev.per_image.size(), 3U);
  EXPECT_TRUE(ev.skipped.empty());
  for (const auto& [name, m] : ev.per_image) {
    SCOPED_TRACE(name);
    const Expected& e = expected.at(name);
    EXPECT_NEAR(m.mae, e.mae, 1e-6);
    ASSERT_TRUE(m.f_w.has_value());
    EXPECT_NEAR(*m.f_w, e.f_w, 1e-6);
    EXPECT_NEAR(m.s_m, e.s_m, 1e-6);
    EXPECT_NEAR(m.e_m, e.e_m, 1e-6);
    EXPECT_NEAR(m.max_f(), e.max_f, 1e-6);
  }
  const Expected& mean = expected.at("mean");
  EXPECT_NEAR(ev.report.mae, mean.mae, 1e-6);
  EXPECT_NEAR(ev.report.f_w, mean.f_w, 1e-6);
  EXPECT_NEAR(ev.report.s_m, mean.s_m, 1e-6);
  EXPECT_NEAR(ev.report.e_m, mean.e_m, 1e-6);
  EXPECT_NEAR(ev.report.max_f, mean.max_f, 1e-6);
  EXPECT_EQ(ev.report.images, 3);
  EXPECT_EQ(ev.report.degenerate, 0);
}

TEST(EvaluateDataset, FixtureAgreesWithInProcessOracles) {
  const auto ev = evaluate_dataset(kFixture / "pred", kFixture / "gt");
  for (const auto& [name, m] : ev.per_image) {
    SCOPED_TRACE(name);
    const auto pred = SaliencyMap::from(read_png_gray(kFixture / "pred" / (name + ".png")));
    GroundTruthMask gt(pred.height(), pred.width());
    const Gray8 g8 = read_png_gray(kFixture / "gt" / (name + ".png"));
    for (std::size_t i = 0; i < gt.size(); ++i) gt[i] = g8[i] > 127 ? 1 : 0;
    EXPECT_NEAR(m.mae, oracle::mae(pred, gt), 1e-12);
    EXPECT_NEAR(*m.f_w, oracle::weighted_f(pred, gt), 1e-6);
    EXPECT_NEAR(m.s_m, oracle::s_measure(pred, gt), 1e-6);
    EXPECT_NEAR(m.e_m, oracle::e_measure(pred, gt), 1e-6);
  }
}

TEST(EvaluateDataset, AggregateMaeIsMeanOfPerImage) {
  const auto ev = evaluate_dataset(kFixture / "pred", kFixture / "gt");
  double s = 0;
  for (const auto& r : ev.per_image) s += r.metrics.mae;
  EXPECT_NEAR(ev.report.mae, s / 3, 1e-12);
}

TEST(EvaluateDataset, PerfectPredictions) {
  const fs::path d = fresh_dir("perfect");
  Rng rng(4);
  for (int i = 0; i < 3; ++i) {
    GroundTruthMask g(16 + 4 * i, 20, 0);
    for (int r = 3; r < 9 + i; ++r)
      for (int c = 5; c < 12; ++c) g(r, c) = 1;
    const Gray8 img = mask_to_gray8(g);
    write_png_gray(d / "pred" / ("m" + std::to_string(i) + ".png"), img);
    write_png_gray(d / "gt" / ("m" + std::to_string(i) + ".png"), img);
  }
  const auto ev = evaluate_dataset(d / "pred", d / "gt");
  EXPECT_NEAR(ev.report.mae, 0.0, 1e-12);
  EXPECT_NEAR(ev.report.f_w, 1.0, 1e-6);
  EXPECT_NEAR(ev.report.s_m, 1.0, 1e-6);
  EXPECT_NEAR(ev.report.e_m, 1.0, 1e-6);
}

TEST(EvaluateDataset, MixedSizesUseGroundTruthResolution) {
  const fs::path d = fresh_dir("mixed");
  Rng rng(9);
  const int sizes[3][2] = {{12, 18}, {20, 20}, {9, 31}};
  std::vector<SaliencyMap> preds;
  std::vector<GroundTruthMask> gts;
  for (int i = 0; i < 3; ++i) {
    GroundTruthMask g = testing::random_mask(sizes[i][0], sizes[i][1], rng);
    // prediction stored at a different extent than its GT for the first two
    const int ph = i < 2 ? sizes[i][0] * 2 : sizes[i][0];
    const int pw = i < 2 ? sizes[i][1] + 3 : sizes[i][1];
    const SaliencyMap p = testing::random_saliency(ph, pw, rng);
    const std::string name = "x" + std::to_string(i) + ".png";
    write_png_gray(d / "pred" / name, quantize(p));
    write_png_gray(d / "gt" / name, mask_to_gray8(g));
    preds.push_back(SaliencyMap::from(quantize(p)));
    gts.push_back(g);
  }
  const auto ev = evaluate_dataset(d / "pred", d / "gt");
  ASSERT_EQ(ev.per_image.size(), 3U);
  for (int i = 0; i < 3; ++i) {
    const SaliencyMap at_gt = resize(preds[i], gts[i].height(), gts[i].width());
    const ImageMetrics want = evaluate_image(at_gt, gts[i]);
    const ImageMetrics& got = ev.per_image[i].metrics;
    EXPECT_DOUBLE_EQ(got.mae, want.mae);
    EXPECT_DOUBLE_EQ(got.s_m, want.s_m);
    EXPECT_DOUBLE_EQ(got.e_m, want.e_m);
    EXPECT_DOUBLE_EQ(*got.f_w, *want.f_w);
  }
}

TEST(EvaluateDataset, UnpairedFileIsNamed) {
  const fs::path d = fresh_dir("unpaired");
  const Gray8 img(8, 8, 255);
  write_png_gray(d / "pred" / "a.png", img);
  write_png_gray(d / "gt" / "a.png", img);
  write_png_gray(d / "gt" / "lonely.png", img);
  try {
    evaluate_dataset(d / "pred", d / "gt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("lonely.png"), std::string::npos) << e.what();
  }
  fs::remove(d / "gt" / "lonely.png");
  write_png_gray(d / "pred" / "stray.png", img);
  try {
    evaluate_dataset(d / "pred", d / "gt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stray.png"), std::string::npos) << e.what();
  }
}

TEST(EvaluateDataset, UnreadableImagesAreSkippedAndCounted) {
  const fs::path d = fresh_dir("unreadable");
  for (const char* n : {"a_blob", "b_scratch"}) {
    fs::copy_file(kFixture / "pred" / (std::string(n) + ".png"), d / "pred" / (std::string(n) + ".png"));
    fs::copy_file(kFixture / "gt" / (std::string(n) + ".png"), d / "gt" / (std::string(n) + ".png"));
  }
  std::ofstream(d / "pred" / "broken.png") << "not a png";
  fs::copy_file(kFixture / "gt" / "c_random.png", d / "gt" / "broken.png");
  const auto ev = evaluate_dataset(d / "pred", d / "gt");
  ASSERT_EQ(ev.skipped.size(), 1U);
  EXPECT_EQ(ev.skipped[0], "broken");
  EXPECT_EQ(ev.report.images, 2);

  write_evaluation(d / "out", ev, false);
  EXPECT_NE(read_file(d / "out" / "report.csv").find("skipped,1"), std::string::npos);
}

TEST(EvaluateDataset, MissingDirectoryIsDataError) {
  EXPECT_THROW(evaluate_dataset("/nonexistent/pred", kFixture / "gt"), DataError);
}

TEST(EvaluateDataset, ThreadCountDoesNotChangeResults) {
  const auto one = evaluate_dataset(kFixture / "pred", kFixture / "gt", {.threads = 1});
  const auto four = evaluate_dataset(kFixture / "pred", kFixture / "gt", {.threads = 4});
  EXPECT_EQ(one.report.mae, four.report.mae);
  EXPECT_EQ(one.report.f_w, four.report.f_w);
  EXPECT_EQ(one.report.s_m, four.report.s_m);
  EXPECT_EQ(one.report.e_m, four.report.e_m);
  EXPECT_EQ(one.report.curves.f_beta, four.report.curves.f_beta);
  ASSERT_EQ(one.per_image.size(), four.per_image.size());
  for (std::size_t i = 0; i < one.per_image.size(); ++i) EXPECT_EQ(one.per_image[i].name, four.per_image[i].name);
}

TEST(EvaluatorThreads, EnvironmentCap) {
  EXPECT_EQ(evaluator_threads(3), 3);
  setenv("JAFFNET_THREADS", "1", 1);
  EXPECT_EQ(evaluator_threads(0), 1);
  unsetenv("JAFFNET_THREADS");
  EXPECT_GE(evaluator_threads(0), 1);
}

TEST(WriteEvaluation, EmitsReportCurvesAndPlot) {
  const fs::path d = fresh_dir("write");
  const auto ev = evaluate_dataset(kFixture / "pred", kFixture / "gt");
  write_evaluation(d, ev, true);
  const std::string report = read_file(d / "report.csv");
  EXPECT_EQ(report.rfind("metric,value\nmae,", 0), 0U);
  for (const char* key : {"\nf_w,", "\ns_m,", "\ne_m,", "\nmax_f,", "\nimages,3"})
    EXPECT_NE(report.find(key), std::string::npos) << key;
  std::ifstream curves(d / "curves.csv");
  std::string line;
  int lines = 0;
  std::getline(curves, line);
  EXPECT_EQ(line, "threshold,precision,recall,f");
  while (std::getline(curves, line)) ++lines;
  EXPECT_EQ(lines, 256);
  EXPECT_TRUE(fs::exists(d / "per_image.csv"));
  const Gray8 plot = read_png_gray(d / "pr_curve.png");
  EXPECT_EQ(plot.height(), 256);
  EXPECT_EQ(plot.width(), 256);
}

TEST(RenderPrCurve, DrawsAxesAndCurve) {
  PrCurves c;
  for (int t = 0; t < kThresholds; ++t) {
    c.precision[t] = 1.0;
    c.recall[t] = 1.0 - t / 255.0;
  }
  const Gray8 img = render_pr_curve(c, 64);
  EXPECT_EQ(img(63, 10), 0);
  EXPECT_EQ(img(10, 0), 0);
  EXPECT_EQ(img(0, 32), 0);
  EXPECT_EQ(img(32, 32), 255);
}

}  // namespace
}  // namespace jaffnet
