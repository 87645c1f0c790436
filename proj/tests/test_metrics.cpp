#include <gtest/gtest.h>

#include "jaffnet/errors.hpp"
#include "jaffnet/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace jaffnet {
namespace {

using testing::random_mask;
using testing::random_saliency;

SaliencyMap as_map(const GroundTruthMask& g) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = g[i];
  return SaliencyMap(g.height(), g.width(), std::move(v));
}

SaliencyMap constant_map(int h, int w, double v) { return SaliencyMap(h, w, std::vector<double>(h * w, v)); }

// A mask guaranteed to contain foreground and background.
GroundTruthMask mixed_mask(int h, int w, Rng& rng, double p = 0.3) {
  for (;;) {
    auto g = random_mask(h, w, rng, p);
    if (g.foreground() > 0 && g.foreground() < g.size()) return g;
  }
}

template <typename Map>
Map flipped(const Map& m, bool horizontal, bool vertical) {
  Map out = m;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      out(vertical ? m.height() - 1 - r : r, horizontal ? m.width() - 1 - c : c) = m(r, c);
  return out;
}

TEST(Mae, Examples) {
  Rng rng(1);
  const auto g = mixed_mask(8, 8, rng);
  EXPECT_EQ(mae(as_map(g), g), 0.0);
  EXPECT_EQ(mae(constant_map(4, 4, 0.5), GroundTruthMask(4, 4, 1)), 0.5);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_saliency(16, 16, rng);
    const auto m = mixed_mask(16, 16, rng);
    EXPECT_NEAR(mae(p, m), oracle::mae(p, m), 1e-12);
  }
}

TEST(Mae, SymmetricInArguments) {
  Rng rng(2);
  const auto a = mixed_mask(9, 7, rng);
  const auto b = mixed_mask(9, 7, rng);
  EXPECT_EQ(mae(as_map(a), b), mae(as_map(b), a));
}

TEST(Mae, ShapeMismatchThrows) {
  EXPECT_THROW(mae(constant_map(4, 4, 0.5), GroundTruthMask(4, 5)), ShapeError);
}

TEST(Curves, FMeasureFixedPoint) {
  EXPECT_NEAR(f_measure(0.8, 0.8), 0.8, 1e-15);
  EXPECT_NEAR(1.3 * 0.64 / (0.3 * 0.8 + 0.8), 0.8, 1e-15);
  EXPECT_EQ(f_measure(0, 0), 0.0);
  EXPECT_NEAR(f_measure(1, 0.5, 1.0), 2.0 / 3.0, 1e-15);
}

TEST(Curves, PerfectPrediction) {
  Rng rng(3);
  const auto g = mixed_mask(12, 12, rng);
  const auto c = pr_and_f_curves(as_map(g), g);
  ASSERT_TRUE(c.has_value());
  const double fg_ratio = static_cast<double>(g.foreground()) / g.size();
  // Everything is predicted positive at t = 0.
  EXPECT_NEAR(c->precision[0], fg_ratio, 1e-15);
  EXPECT_EQ(c->recall[0], 1.0);
  for (int i = 1; i < kThresholds; ++i) {
    EXPECT_EQ(c->precision[i], 1.0) << i;
    EXPECT_EQ(c->recall[i], 1.0) << i;
  }
}

TEST(Curves, MatchCountingOracle) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const int h = t % 2 ? 8 : 16;
    const auto p = random_saliency(h, h, rng);
    const auto g = mixed_mask(h, h, rng);
    const auto c = pr_and_f_curves(p, g);
    ASSERT_TRUE(c.has_value());
    for (int i = 0; i < kThresholds; ++i) {
      const auto o = oracle::pr_at(p, g, i);
      EXPECT_NEAR(c->precision[i], o.precision, 1e-12);
      EXPECT_NEAR(c->recall[i], o.recall, 1e-12);
      EXPECT_NEAR(c->f_beta[i], oracle::f_beta(o.precision, o.recall), 1e-12);
    }
  }
}

TEST(Curves, HalfThresholdExample) {
  Rng rng(5);
  const auto p = random_saliency(8, 8, rng);
  const auto g = mixed_mask(8, 8, rng);
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= 128.0 / 255) (g[i] ? tp : fp)++;
  }
  const auto c = pr_and_f_curves(p, g);
  EXPECT_EQ(c->precision[128], tp + fp ? static_cast<double>(tp) / (tp + fp) : 1.0);
  EXPECT_EQ(c->recall[128], static_cast<double>(tp) / g.foreground());
}

TEST(Curves, EmptyPredictionHasUnitPrecision) {
  Rng rng(6);
  const auto g = mixed_mask(6, 6, rng);
  const auto c = pr_and_f_curves(constant_map(6, 6, 0.0), g);
  for (int i = 1; i < kThresholds; ++i) {
    EXPECT_EQ(c->precision[i], 1.0);
    EXPECT_EQ(c->recall[i], 0.0);
    EXPECT_EQ(c->f_beta[i], 0.0);
  }
}

TEST(Curves, Sanity) {
  Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto c = pr_and_f_curves(random_saliency(10, 14, rng), mixed_mask(10, 14, rng));
    for (int i = 0; i < kThresholds; ++i) {
      EXPECT_GE(c->precision[i], 0.0);
      EXPECT_LE(c->precision[i], 1.0);
      if (i > 0) EXPECT_LE(c->recall[i], c->recall[i - 1]);
    }
  }
}

TEST(Curves, DegenerateTruthIsFlagged) {
  EXPECT_FALSE(pr_and_f_curves(constant_map(4, 4, 0.3), GroundTruthMask(4, 4)).has_value());
  EXPECT_FALSE(weighted_fbeta(constant_map(4, 4, 0.3), GroundTruthMask(4, 4)).has_value());
}

TEST(DistanceTransform, MatchesBruteForce) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto g = mixed_mask(11, 13, rng, 0.1);
    const auto dt = distance_to_foreground(g);
    for (int r = 0; r < 11; ++r)
      for (int c = 0; c < 13; ++c) {
        long best = std::numeric_limits<long>::max();
        std::size_t arg = 0;
        // Column-major scan so the first strict minimum has the smallest column, then row.
        for (int cc = 0; cc < 13; ++cc)
          for (int rr = 0; rr < 11; ++rr) {
            if (!g(rr, cc)) continue;
            const long d = (rr - r) * (rr - r) + (cc - c) * (cc - c);
            if (d < best) {
              best = d;
              arg = static_cast<std::size_t>(rr) * 13 + cc;
            }
          }
        EXPECT_EQ(dt.distance[r * 13 + c], std::sqrt(static_cast<double>(best)));
        EXPECT_EQ(dt.nearest[r * 13 + c], arg);
      }
  }
}

TEST(WeightedF, PerfectIsOne) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto g = mixed_mask(16, 16, rng);
    EXPECT_NEAR(*weighted_fbeta(as_map(g), g), 1.0, 1e-6);
  }
}

TEST(WeightedF, InvertedIsZero) {
  // Foreground kept three pixels from the border so the zero-padded smoothing
  // sees only propagated error.
  GroundTruthMask g(20, 20);
  for (int r = 5; r < 12; ++r)
    for (int c = 4; c < 15; ++c) g(r, c) = 1;
  std::vector<double> inv(g.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - g[i];
  EXPECT_NEAR(*weighted_fbeta(SaliencyMap(20, 20, inv), g), 0.0, 1e-6);
}

TEST(WeightedF, MatchesOracle) {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const auto p = random_saliency(16, 16, rng);
    const auto g = mixed_mask(16, 16, rng, t % 3 == 0 ? 0.05 : 0.3);
    EXPECT_NEAR(*weighted_fbeta(p, g), oracle::weighted_f(p, g), 1e-6);
  }
}

TEST(WeightedF, MonotoneUnderCorrection) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    auto p = random_saliency(16, 16, rng);
    const auto g = mixed_mask(16, 16, rng);
    double prev_f = *weighted_fbeta(p, g);
    double prev_mae = mae(p, g);
    std::vector<double> v(p.values().begin(), p.values().end());
    std::vector<std::size_t> order(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < order.size(); k += 37) {
      for (std::size_t j = k; j < std::min(order.size(), k + 37); ++j) v[order[j]] = g[order[j]];
      const SaliencyMap q(16, 16, v);
      const double f = *weighted_fbeta(q, g);
      const double m = mae(q, g);
      EXPECT_GE(f, prev_f - 1e-12);
      EXPECT_LE(m, prev_mae + 1e-12);
      prev_f = f;
      prev_mae = m;
    }
  }
}

TEST(SMeasure, Examples) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const auto g = mixed_mask(16, 16, rng);
    EXPECT_NEAR(s_measure(as_map(g), g), 1.0, 1e-6);
  }
  EXPECT_EQ(s_measure(constant_map(5, 5, 0.0), GroundTruthMask(5, 5)), 1.0);
  EXPECT_NEAR(s_measure(constant_map(5, 5, 0.2), GroundTruthMask(5, 5)), 0.8, 1e-15);
  EXPECT_NEAR(s_measure(constant_map(5, 5, 0.2), GroundTruthMask(5, 5, 1)), 0.2, 1e-15);
}

TEST(SMeasure, MatchesOracle) {
  Rng rng(13);
  for (int t = 0; t < 30; ++t) {
    const auto p = random_saliency(16, 16, rng);
    const auto g = mixed_mask(16, 16, rng, t % 3 == 0 ? 0.05 : 0.4);
    EXPECT_NEAR(s_measure(p, g), oracle::s_measure(p, g), 1e-6);
  }
}

TEST(SMeasure, InRange) {
  Rng rng(14);
  for (int t = 0; t < 30; ++t) {
    const double s = s_measure(random_saliency(9, 12, rng), mixed_mask(9, 12, rng));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

// The quadrant split sits on the rounded centroid, so a mirrored pair is the
// original evaluated at the mirrored split (one row/column over).
TEST(SMeasure, FlipsMapToMirroredSplit) {
  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_saliency(12, 15, rng);
    const auto g = mixed_mask(12, 15, rng);
    const auto base = structure_terms(p, g);
    for (auto [hf, vf] : {std::pair{true, false}, {false, true}, {true, true}}) {
      const auto f = structure_terms(flipped(p, hf, vf), flipped(g, hf, vf));
      EXPECT_NEAR(f.object, base.object, 1e-12);
      EXPECT_EQ(f.split_cols, hf ? 15 + 1 - base.split_cols : base.split_cols);
      EXPECT_EQ(f.split_rows, vf ? 12 + 1 - base.split_rows : base.split_rows);
      const auto mirrored = structure_terms(
          p, g, std::pair{vf ? base.split_rows - 1 : base.split_rows, hf ? base.split_cols - 1 : base.split_cols});
      EXPECT_NEAR(f.region, mirrored.region, 1e-12);
      double oracle_region = 0;
      oracle::s_measure(p, g, mirrored.split_rows, mirrored.split_cols, &oracle_region);
      EXPECT_NEAR(f.region, oracle_region, 1e-9);
    }
  }
}

TEST(EMeasure, Examples) {
  Rng rng(16);
  for (int t = 0; t < 10; ++t) {
    const auto g = mixed_mask(16, 16, rng);
    EXPECT_NEAR(e_measure(as_map(g), g), 1.0, 1e-6);
  }
  EXPECT_NEAR(e_measure(constant_map(4, 4, 0.25), GroundTruthMask(4, 4)), 0.75, 1e-15);
  EXPECT_NEAR(e_measure(constant_map(4, 4, 0.25), GroundTruthMask(4, 4, 1)), 0.25, 1e-15);
}

TEST(EMeasure, AlignedBiasGivesOne) {
  // Identical bias maps make phi 1 everywhere (up to eps); a scaled bias map does not.
  Rng rng(17);
  const auto g = mixed_mask(10, 10, rng);
  EXPECT_NEAR(e_measure(as_map(g), g), 1.0, 1e-10);
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * g[i] + 0.25;
  const SaliencyMap p(10, 10, v);
  EXPECT_LT(e_measure(p, g), 1.0);
  EXPECT_GT(e_measure(p, g), 0.8);
}

TEST(EMeasure, MatchesOracle) {
  Rng rng(18);
  for (int t = 0; t < 30; ++t) {
    const auto p = random_saliency(16, 16, rng);
    const auto g = mixed_mask(16, 16, rng);
    EXPECT_NEAR(e_measure(p, g), oracle::e_measure(p, g), 1e-6);
  }
}

TEST(Metrics, FlipInvariance) {
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_saliency(13, 11, rng);
    const auto g = mixed_mask(13, 11, rng);
    const auto base = evaluate_image(p, g);
    for (auto [hf, vf] : {std::pair{true, false}, {false, true}, {true, true}}) {
      const auto m = evaluate_image(flipped(p, hf, vf), flipped(g, hf, vf));
      EXPECT_NEAR(m.mae, base.mae, 1e-12);
      EXPECT_NEAR(*m.f_w, *base.f_w, 1e-12);
      EXPECT_NEAR(m.e_m, base.e_m, 1e-12);
      for (int i = 0; i < kThresholds; ++i) {
        EXPECT_EQ(m.curves->precision[i], base.curves->precision[i]);
        EXPECT_EQ(m.curves->recall[i], base.curves->recall[i]);
      }
    }
  }
}

TEST(Metrics, ReportsInUnitInterval) {
  Rng rng(20);
  for (int t = 0; t < 20; ++t) {
    const auto m = evaluate_image(random_saliency(16, 16, rng), mixed_mask(16, 16, rng));
    for (double v : {m.mae, *m.f_w, m.s_m, m.e_m, m.max_f()}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Aggregate, MeansAndDegenerateExclusion) {
  Rng rng(21);
  std::vector<ImageMetrics> ms;
  for (int t = 0; t < 3; ++t) ms.push_back(evaluate_image(random_saliency(8, 8, rng), mixed_mask(8, 8, rng)));
  ms.push_back(evaluate_image(random_saliency(8, 8, rng), GroundTruthMask(8, 8)));
  const auto r = aggregate(ms);
  EXPECT_EQ(r.images, 4);
  EXPECT_EQ(r.degenerate, 1);
  EXPECT_NEAR(r.mae, (ms[0].mae + ms[1].mae + ms[2].mae + ms[3].mae) / 4, 1e-12);
  EXPECT_NEAR(r.s_m, (ms[0].s_m + ms[1].s_m + ms[2].s_m + ms[3].s_m) / 4, 1e-12);
  EXPECT_NEAR(r.f_w, (*ms[0].f_w + *ms[1].f_w + *ms[2].f_w) / 3, 1e-12);
  for (int i = 0; i < kThresholds; ++i)
    EXPECT_NEAR(r.curves.f_beta[i],
                (ms[0].curves->f_beta[i] + ms[1].curves->f_beta[i] + ms[2].curves->f_beta[i]) / 3, 1e-12);
  double best = 0;
  for (double f : r.curves.f_beta) best = std::max(best, f);
  EXPECT_EQ(r.max_f, best);
}

TEST(Aggregate, Empty) {
  const auto r = aggregate({});
  EXPECT_EQ(r.images, 0);
  EXPECT_EQ(r.mae, 0.0);
}

}  // namespace
}  // namespace jaffnet
