#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "morphnas/heuristics/allocator.hpp"
#include "morphnas/heuristics/importance.hpp"
#include "morphnas/heuristics/loss_curve.hpp"
#include "morphnas/heuristics/threshold.hpp"

namespace morphnas::heuristics {
namespace {

LayerCatalog make_catalog(std::size_t n) {
  LayerCatalog c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({LayerId{static_cast<std::uint32_t>(10 + i)}, 4, 4, 4, true, 0});
  return c;
}

TEST(Threshold, Examples) {
  EXPECT_EQ(growth_threshold(64, 64), 64.0);
  EXPECT_EQ(growth_threshold(1, 1), 1.0);
  EXPECT_NEAR(growth_threshold(4, 2), 2.5198421, 1e-7);
  EXPECT_THROW(growth_threshold(0, 3), InvalidArgument);
}

TEST(Threshold, StrictBoundaryAgreesWithCubeComparison) {
  for (std::size_t i = 1; i <= 40; ++i)
    for (std::size_t o = 1; o <= 40; ++o) {
      const std::size_t m = static_cast<std::size_t>(std::floor(growth_threshold(i, o) + 1e-9));
      for (std::size_t h = m > 2 ? m - 2 : 0; h <= m + 2; ++h)
        EXPECT_EQ(exceeds_growth_threshold(h, i, o), h * h * h > i * o * o) << h << " " << i << " " << o;
    }
  EXPECT_TRUE(exceeds_growth_threshold(65, 64, 64));
  EXPECT_FALSE(exceeds_growth_threshold(64, 64, 64));
  EXPECT_TRUE(exceeds_growth_threshold(3, 4, 2));
  EXPECT_FALSE(exceeds_growth_threshold(2, 4, 2));
}

TEST(Importance, ZeroActivationsOnlyCountSamples) {
  ImportanceAccumulator acc;
  acc.accumulate(LayerId{1}, Matrix<double>(3, 2), Matrix<double>(3, 2, 5.0));
  const auto* s = acc.find(LayerId{1});
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->samples, 3u);
  EXPECT_EQ(s->sum_abs_prod, (std::vector<double>{0, 0}));
  EXPECT_EQ(s->nonzero, (std::vector<std::uint64_t>{0, 0}));
}

TEST(Importance, SingleSampleExample) {
  ImportanceAccumulator acc;
  acc.accumulate(LayerId{1}, Matrix<double>::from_rows({{1, 0}}), Matrix<double>::from_rows({{2, 5}}));
  const auto* s = acc.find(LayerId{1});
  EXPECT_EQ(s->sum_abs_prod, (std::vector<double>{2, 0}));
  EXPECT_EQ(s->nonzero, (std::vector<std::uint64_t>{1, 0}));
}

TEST(Importance, TwoBatchesEqualOneConcatenatedBatch) {
  Rng rng(1);
  Matrix<double> a(10, 4), g(10, 4);
  for (auto& v : a.values()) v = std::max(0.0, rng.uniform(-1, 1));
  for (auto& v : g.values()) v = rng.uniform(-1, 1);
  ImportanceAccumulator whole, parts;
  whole.accumulate(LayerId{3}, a, g);
  Matrix<double> a1(6, 4), a2(4, 4), g1(6, 4), g2(4, 4);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      (i < 6 ? a1(i, j) : a2(i - 6, j)) = a(i, j);
      (i < 6 ? g1(i, j) : g2(i - 6, j)) = g(i, j);
    }
  parts.accumulate(LayerId{3}, a1, g1);
  parts.accumulate(LayerId{3}, a2, g2);
  EXPECT_EQ(whole.find(LayerId{3})->nonzero, parts.find(LayerId{3})->nonzero);
  for (std::size_t j = 0; j < 4; ++j)
    EXPECT_NEAR(whole.find(LayerId{3})->sum_abs_prod[j], parts.find(LayerId{3})->sum_abs_prod[j], 1e-12);
  EXPECT_EQ(whole.find(LayerId{3})->samples, parts.find(LayerId{3})->samples);
}

TEST(Importance, ShapeMismatchAndResets) {
  ImportanceAccumulator acc;
  EXPECT_THROW(acc.accumulate(LayerId{1}, Matrix<double>(2, 2), Matrix<double>(2, 3)), ShapeError);
  acc.accumulate(LayerId{1}, Matrix<double>(2, 2), Matrix<double>(2, 2));
  EXPECT_THROW(acc.accumulate(LayerId{1}, Matrix<double>(2, 3), Matrix<double>(2, 3)), ShapeError);
  acc.reset();
  EXPECT_TRUE(acc.layers().empty());
  EXPECT_THROW(importance_scores(acc), InvalidArgument);
}

TEST(Importance, FormulaCases) {
  EXPECT_EQ(importance_score(5.0, 1.0), 0.0);
  EXPECT_EQ(importance_score(0.0, 0.3), 0.0);
  EXPECT_NEAR(importance_score(2.0, 0.5), 1.99999999977, 1e-9);
  for (double b = 0.0; b <= 0.8 + 1e-12; b += 0.01) EXPECT_GT(1.0 - std::pow(b, 33.0), 0.999);
}

TEST(Importance, ScoresFromAccumulator) {
  ImportanceAccumulator acc;
  // Neuron 0 always fires, neuron 1 fires half the time.
  acc.accumulate(LayerId{2}, Matrix<double>::from_rows({{1, 1}, {1, 0}}), Matrix<double>::from_rows({{1, 1}, {1, 1}}));
  const auto s = importance_scores(acc);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].score, 0.0);
  EXPECT_NEAR(s[1].score, 1.0 * (1.0 - std::pow(0.5, 33.0)), 1e-15);
}

TEST(SelectPrune, EmptyRequest) {
  const std::vector<NeuronScore> scores = {{{LayerId{10}, 0}, 1.0}};
  EXPECT_TRUE(select_prune(scores, 0, make_catalog(1)).victims.empty());
}

TEST(SelectPrune, EqualScoresFollowCatalogThenNeuronOrder) {
  auto cat = make_catalog(2);
  std::swap(cat[0], cat[1]);  // catalog order: L11 then L10
  std::vector<NeuronScore> scores;
  for (std::uint32_t id : {10u, 11u})
    for (std::size_t n = 0; n < 3; ++n) scores.push_back({{LayerId{id}, n}, 0.5});
  const auto sel = select_prune(scores, 4, cat);
  const std::vector<NeuronRef> want = {{LayerId{11}, 0}, {LayerId{11}, 1}, {LayerId{11}, 2}, {LayerId{10}, 0}};
  EXPECT_EQ(sel.victims, want);
}

TEST(SelectPrune, MatchesSortOracleAndIsOrderIndependent) {
  Rng rng(5);
  const auto cat = make_catalog(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<NeuronScore> scores;
    for (const auto& e : cat)
      for (std::size_t n = 0; n < 1 + rng.below(6); ++n) scores.push_back({{e.id, n}, rng.uniform()});
    const std::size_t m = rng.below(scores.size() + 1);
    std::vector<double> values;
    for (const auto& s : scores) values.push_back(s.score);
    std::sort(values.begin(), values.end());
    const auto sel = select_prune(scores, m, cat);
    ASSERT_EQ(sel.victims.size(), m);
    for (const auto& v : sel.victims) {
      const auto it = std::find_if(scores.begin(), scores.end(), [&](const NeuronScore& s) { return s.ref == v; });
      if (m > 0) {
        EXPECT_LE(it->score, values[m - 1]);
      }
    }
    std::mt19937 g(static_cast<unsigned>(trial));
    auto shuffled = scores;
    std::shuffle(shuffled.begin(), shuffled.end(), g);
    EXPECT_EQ(select_prune(shuffled, m, cat).victims, sel.victims);

    auto scaled = scores;
    for (auto& s : scaled) s.score *= 3.5;
    auto a = select_prune(scaled, m, cat).victims;
    auto b = sel.victims;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(SelectPrune, TooManyReportsShortfall) {
  const std::vector<NeuronScore> scores = {{{LayerId{10}, 0}, 1.0}, {{LayerId{10}, 1}, 2.0}};
  const auto sel = select_prune(scores, 5, make_catalog(1));
  EXPECT_EQ(sel.victims.size(), 2u);
  EXPECT_EQ(sel.shortfall, 3u);
}

TEST(Allocator, MovingAverageRecurrence) {
  GrowthAllocator a(0.5);
  a.update_ma({{LayerId{1}, 0}});
  EXPECT_EQ(a.moving_average(LayerId{1}), 0.0);
  a.update_ma({{LayerId{2}, 10}});
  EXPECT_EQ(a.moving_average(LayerId{2}), 5.0);
  a.update_ma({{LayerId{2}, 30}});
  EXPECT_EQ(a.moving_average(LayerId{2}), 17.5);

  GrowthAllocator latest(1.0);
  latest.update_ma({{LayerId{1}, 7}});
  latest.update_ma({{LayerId{1}, -3}});
  EXPECT_EQ(latest.moving_average(LayerId{1}), -3.0);
}

TEST(Allocator, RetainDropsVanishedLayers) {
  GrowthAllocator a;
  a.update_ma({{LayerId{10}, 4}, {LayerId{99}, 4}});
  a.retain(make_catalog(1));
  EXPECT_EQ(a.averages().size(), 1u);
  EXPECT_EQ(a.averages().count(LayerId{10}), 1u);
}

TEST(Allocator, SimpleCases) {
  GrowthAllocator a;
  Rng rng(1);
  for (const auto& [id, n] : a.allocate(0, make_catalog(3), rng)) EXPECT_EQ(n, 0u);
  const auto one = a.allocate(37, make_catalog(1), rng);
  EXPECT_EQ(one.at(LayerId{10}), 37u);
  EXPECT_THROW(a.allocate(5, LayerCatalog{}, rng), InvalidArgument);
}

TEST(Allocator, AlwaysConservesTotal) {
  Rng rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto cat = make_catalog(1 + rng.below(6));
    GrowthAllocator a;
    for (const auto& e : cat) a.set_average(e.id, rng.uniform(-20, 20));
    const std::size_t p = rng.below(500);
    std::size_t sum = 0;
    for (const auto& [id, n] : a.allocate(p, cat, rng)) sum += n;
    ASSERT_EQ(sum, p);
  }
}

TEST(Allocator, MonteCarloMatchesClosedFormExpectation) {
  const auto cat = make_catalog(3);
  GrowthAllocator a;
  a.set_average(cat[0].id, 30);
  a.set_average(cat[1].id, 10);
  a.set_average(cat[2].id, 0);
  std::vector<double> mean(3, 0.0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto got = a.allocate(1000, cat, rng);
    for (std::size_t i = 0; i < 3; ++i) mean[i] += static_cast<double>(got.at(cat[i].id)) / 200.0;
  }
  const double expect[] = {625, 275, 100};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(mean[i], expect[i], 0.03 * expect[i]);
}

TEST(Allocator, NegativeAveragesFallBackToUniform) {
  const auto cat = make_catalog(2);
  GrowthAllocator a;
  a.set_average(cat[0].id, -5);
  a.set_average(cat[1].id, -1);
  double first = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    first += static_cast<double>(a.allocate(100, cat, rng).at(cat[0].id)) / 200.0;
  }
  EXPECT_NEAR(first, 50.0, 1.5);
}

TEST(Allocator, DeterministicGivenSeed) {
  const auto cat = make_catalog(4);
  GrowthAllocator a;
  a.set_average(cat[2].id, 3);
  Rng r1(9), r2(9);
  EXPECT_EQ(a.allocate(100, cat, r1), a.allocate(100, cat, r2));
}

std::vector<double> model_curve(double a, std::size_t n, double noise = 0.0, std::uint64_t seed = 0) {
  Rng rng(seed);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = loss_curve_model(a, static_cast<double>(i) / static_cast<double>(n - 1)) + noise * rng.normal();
  return y;
}

TEST(LossCurve, RecoversModelExponents) {
  for (double a : {-20.0, -10.0, -7.0, -5.0, -1.0, 0.0}) {
    const auto y = model_curve(a, 20);
    EXPECT_NEAR(fit_loss_curve(y).a, a, 0.05) << "a = " << a;
  }
  const auto line = model_curve(0.0, 10);
  EXPECT_NEAR(fit_loss_curve(line).a, 0.0, 0.01);
}

TEST(LossCurve, NoisyFlatteningCurvesStillStop) {
  // Min-max normalization of noisy data biases a towards zero, but a
  // flattening curve must still read as flattened.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto y = model_curve(-7.0, 20, 0.02, seed);
    const double a = fit_loss_curve(y).a;
    EXPECT_LT(a, kFlatteningThreshold) << "seed " << seed;
    EXPECT_NEAR(a, -7.0, 2.0) << "seed " << seed;
  }
}

TEST(LossCurve, AffineInvariance) {
  auto y = model_curve(-3.0, 15);
  const double a0 = fit_loss_curve(y).a;
  for (auto& v : y) v = 4.0 * v + 2.5;
  EXPECT_NEAR(fit_loss_curve(y).a, a0, 1e-9);
}

TEST(LossCurve, ConstantAndShortInputs) {
  const std::vector<double> flat(5, 0.7);
  const auto fit = fit_loss_curve(flat);
  EXPECT_TRUE(fit.flat_sentinel());
  EXPECT_TRUE(should_stop(fit, 1, 100));
  const std::vector<double> two = {1.0, 0.5};
  EXPECT_THROW(fit_loss_curve(two), InvalidArgument);
}

TEST(LossCurve, StopTruthTable) {
  EXPECT_TRUE(should_stop({-7.0, 0}, 3, 100));
  EXPECT_FALSE(should_stop({-2.0, 0}, 3, 100));
  EXPECT_TRUE(should_stop({-2.0, 0}, 100, 100));
  EXPECT_FALSE(should_stop({-5.0, 0}, 3, 100));
  EXPECT_TRUE(should_stop({-5.0001, 0}, 3, 100));
}

}  // namespace
}  // namespace morphnas::heuristics
