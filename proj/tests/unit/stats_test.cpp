#include <cmath>

#include <gtest/gtest.h>

#include "certdw/error.hpp"
#include "certdw/stats.hpp"
#include "support/oracles.hpp"

namespace certdw {
namespace {

const Shape kPoint{1, 1, 1};
const Shape kPair{1, 1, 2};

LabeledDataset make_pool(const Shape& shape, std::size_t k, const std::vector<std::pair<std::vector<double>, Label>>& items) {
  LabeledDataset pool;
  pool.shape = shape;
  pool.num_classes = k;
  pool.split = Split::kTest;
  for (const auto& [v, y] : items) {
    pool.images.emplace_back(shape, v);
    pool.labels.push_back(y);
  }
  return pool;
}

// 1-D table with label = cell mod k over cells [-100, 100].
Classifier cycling_table(std::size_t k) {
  TableParams p{1.0, 0, {}};
  for (std::int64_t c = -100; c <= 100; ++c) {
    p.cells[{c}] = static_cast<Label>(((c % static_cast<std::int64_t>(k)) + static_cast<std::int64_t>(k)) % static_cast<std::int64_t>(k));
  }
  return Classifier::table(kPoint, k, p);
}

ClassRepresentatives reps_of(const Shape& shape, const std::vector<std::vector<double>>& xs) {
  ClassRepresentatives r;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    r.samples.emplace_back(shape, xs[k]);
    r.labels.push_back(static_cast<Label>(k));
  }
  return r;
}

SmoothingRun run_with(NoiseSpec noise, std::uint64_t m, std::uint64_t seed) {
  return SmoothingRun{noise, m, SeededStream(seed), 1};
}

PredictionDistribution pd_from(std::vector<std::uint64_t> counts) {
  PredictionCounts c;
  for (auto v : counts) c.total += v;
  c.counts = std::move(counts);
  return PredictionDistribution::from_counts(c);
}

TEST(Representatives, OnePerClassAndCorrect) {
  const auto f = cycling_table(3);
  const auto pool = make_pool(kPoint, 3, {{{0.5}, 0}, {{1.5}, 1}, {{2.5}, 2}, {{3.5}, 0}, {{4.5}, 1}, {{5.5}, 2}});
  const auto reps = select_class_representatives(f, pool, SeededStream(1), 1, "m0");
  ASSERT_EQ(reps.samples.size(), 3u);
  EXPECT_EQ(reps.source, "m0");
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(reps.labels[k], k);
    EXPECT_EQ(f.predict(reps.samples[k]), k);
  }
}

TEST(Representatives, DifferentSeedsStayValid) {
  const auto f = cycling_table(2);
  std::vector<std::pair<std::vector<double>, Label>> items;
  for (int c = 0; c < 20; ++c) items.push_back({{c + 0.5}, static_cast<Label>(c % 2)});
  // Some mislabeled samples that must never be selected.
  items.push_back({{0.5}, 1});
  items.push_back({{1.5}, 0});
  const auto pool = make_pool(kPoint, 2, items);
  bool differed = false;
  const auto first = select_class_representatives(f, pool, SeededStream(0), 2);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto reps = select_class_representatives(f, pool, SeededStream(seed), 2);
    ASSERT_EQ(reps.samples.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(reps.labels[i], i / 2);
      EXPECT_EQ(f.predict(reps.samples[i]), reps.labels[i]);
    }
    differed = differed || !(reps.samples == first.samples);
  }
  EXPECT_TRUE(differed);
  EXPECT_EQ(select_class_representatives(f, pool, SeededStream(4), 2).samples,
            select_class_representatives(f, pool, SeededStream(4), 2).samples);
}

TEST(Representatives, MissingClassIsNamed) {
  TableParams p{1.0, 0, {}};
  p.cells[{1}] = 1;
  p.cells[{2}] = 2;
  const auto f = Classifier::table(kPoint, 4, p);
  const auto pool = make_pool(kPoint, 4, {{{0.5}, 0}, {{1.5}, 1}, {{2.5}, 2}, {{3.5}, 3}});
  try {
    select_class_representatives(f, pool, SeededStream(0));
    FAIL() << "expected an error";
  } catch (const RepresentativeUnavailableError& e) {
    EXPECT_EQ(e.label(), 3u);
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(PrincipalProbability, AveragesThenTakesMax) {
  const std::vector<PredictionDistribution> pds{pd_from({7, 3}), pd_from({4, 6})};
  EXPECT_NEAR(principal_probability_of(pds), 0.55, 1e-15);
}

TEST(PrincipalProbability, ConstantClassifierIsOne) {
  const auto f = Classifier::table(kPair, 3, TableParams{1.0, 0, {}});
  const auto reps = reps_of(kPair, {{0, 0}, {1, 1}, {2, 2}});
  EXPECT_EQ(principal_probability(f, reps, run_with(NoiseSpec::gaussian(1.0), 64, 3)), 1.0);
}

TEST(PrincipalProbability, BalancedCellsApproachUniform) {
  for (std::size_t k : {2u, 4u, 5u}) {
    const auto f = cycling_table(k);
    std::vector<std::vector<double>> xs;
    for (std::size_t c = 0; c < k; ++c) xs.push_back({c + 0.5});
    const double half = 2.0 * static_cast<double>(k);  // width 4k cells: each label covers 4 cells
    const double pp = principal_probability(f, reps_of(kPoint, xs), run_with(NoiseSpec::uniform(-half, half), 40000, k));
    EXPECT_GE(pp, 1.0 / k);
    EXPECT_NEAR(pp, 1.0 / k, 0.012) << "k=" << k;
  }
}

TEST(PrincipalProbability, AtLeastOneOverKAndOnGrid) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  const Shape shape{1, 2, 2};
  for (int trial = 0; trial < 20; ++trial) {
    LinearParams lp{std::vector<double>(12), std::vector<double>(3)};
    for (double& v : lp.weight) v = n(rng);
    const auto f = Classifier::linear(shape, 3, lp);
    ClassRepresentatives reps;
    for (int i = 0; i < 3; ++i) {
      ImageTensor x(shape);
      for (double& v : x.values) v = n(rng);
      reps.samples.push_back(x);
      reps.labels.push_back(static_cast<Label>(i));
    }
    const std::uint64_t m = 257;
    const auto run = run_with(NoiseSpec::gaussian(0.5), m, static_cast<std::uint64_t>(trial));
    const double pp = principal_probability(f, reps, run);
    EXPECT_GE(pp, 1.0 / 3 - 1e-15);
    EXPECT_LE(pp, 1.0);
    const double s = stability(f, reps, 1, run);
    EXPECT_NEAR(s * m, std::round(s * m), 1e-9);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(WatermarkRobustness, ConstantTargetIsOne) {
  const auto f = Classifier::table(kPair, 2, TableParams{1.0, 1, {}});
  const auto reps = reps_of(kPair, {{0, 0}, {1, 1}});
  TriggerSpec t = make_blended_noise_trigger(kPair, 0.3, 1, SeededStream(0));
  const auto run = run_with(NoiseSpec::gaussian(1.0), 100, 1);
  EXPECT_EQ(watermark_robustness(f, reps, t, run), 1.0);
  EXPECT_EQ(stability(f, reps, 1, run), 1.0);
}

TEST(WatermarkRobustness, NeverTargetIsZero) {
  const auto f = Classifier::table(kPair, 2, TableParams{1.0, 0, {}});
  const auto reps = reps_of(kPair, {{0, 0}, {1, 1}});
  TriggerSpec t = make_blended_noise_trigger(kPair, 0.3, 1, SeededStream(0));
  const auto run = run_with(NoiseSpec::gaussian(1.0), 100, 1);
  EXPECT_EQ(watermark_robustness(f, reps, t, run), 0.0);
  EXPECT_EQ(stability(f, reps, 1, run), 0.0);
}

TEST(WatermarkRobustness, LinearRuleMatchesClosedForm) {
  const std::vector<double> w{1.0, -0.5};
  const double b = -0.2;
  std::vector<double> weight{0, 0, w[0], w[1]};
  const auto f = Classifier::linear(kPair, 2, LinearParams{weight, {0.0, b}});
  const auto reps = reps_of(kPair, {{0.1, 0.6}, {0.9, 0.2}});
  TriggerSpec t = make_blended_noise_trigger(kPair, 0.6, 1, SeededStream(7));
  const double sigma = 0.8;
  const auto run = run_with(NoiseSpec::gaussian(sigma), 100000, 17);
  double want_w = 1, want_s = 1;
  for (const auto& x : reps.samples) {
    const auto shifted = apply_trigger(x, t, false);
    const double norm = std::hypot(w[0], w[1]);
    want_w = std::min(want_w, testing::phi_oracle((w[0] * shifted.values[0] + w[1] * shifted.values[1] + b) / (sigma * norm)));
    want_s = std::min(want_s, testing::phi_oracle((w[0] * x.values[0] + w[1] * x.values[1] + b) / (sigma * norm)));
  }
  SmoothingRun unclipped = run;
  EXPECT_NEAR(watermark_robustness(f, reps, t, unclipped), want_w, 0.006);
  EXPECT_NEAR(stability(f, reps, 1, unclipped), want_s, 0.006);
}

TEST(WatermarkRobustness, ZeroTriggerEqualsStability) {
  const Shape shape{1, 2, 2};
  TriggerSpec t;
  t.kind = TriggerKind::kBlendedNoise;
  t.shape = shape;
  t.mask.assign(4, 0.0);
  t.pattern.assign(4, 0.0);
  t.target_label = 1;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  LinearParams lp{std::vector<double>(12), std::vector<double>(3)};
  for (double& v : lp.weight) v = n(rng);
  const auto f = Classifier::linear(shape, 3, lp);
  const auto reps = reps_of(shape, {{0.1, 0.2, 0.3, 0.4}, {0.5, 0.5, 0.5, 0.5}, {0.9, 0.1, 0.9, 0.1}});
  const auto run = run_with(NoiseSpec::gaussian(0.6), 2048, 23);
  EXPECT_EQ(watermark_robustness(f, reps, t, run), stability(f, reps, 1, run));
}

TEST(Reductions, MinIsMonotone) {
  std::vector<PredictionDistribution> pds{pd_from({2, 8}), pd_from({5, 5}), pd_from({1, 9})};
  const double before = min_target_probability(pds, 1);
  EXPECT_DOUBLE_EQ(before, 0.5);
  pds[2] = pd_from({7, 3});
  EXPECT_LE(min_target_probability(pds, 1), before);
  EXPECT_DOUBLE_EQ(min_target_probability(pds, 1), 0.3);
}

}  // namespace
}  // namespace certdw
