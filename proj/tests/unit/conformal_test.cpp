#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "certdw/conformal.hpp"
#include "certdw/error.hpp"

namespace certdw {
namespace {

const std::vector<double> kFive{0.1, 0.2, 0.3, 0.4, 0.5};

CalibrationSet five() { return make_calibration_set(kFive, {"a", "b", "c", "d", "e"}, 0.2); }

CalibrationSet sorted_set(std::vector<double> values, double kappa) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < values.size(); ++i) ids.push_back("m" + std::to_string(i));
  return make_calibration_set(std::move(values), std::move(ids), kappa);
}

TEST(OutlierCount, FloorOfProduct) {
  EXPECT_EQ(outlier_count(100, 0.2), 20u);
  EXPECT_EQ(outlier_count(5, 0.2), 1u);
  EXPECT_EQ(outlier_count(10, 0.3), 3u);  // 10 * 0.3 evaluates to 2.9999999999999996
  EXPECT_EQ(outlier_count(7, 0.0), 0u);
  EXPECT_EQ(outlier_count(9, 0.5), 4u);
}

TEST(CalibrationSet, SortsValuesAndKeepsIdsAligned) {
  const auto c = make_calibration_set({0.3, 0.1, 0.2}, {"x", "y", "z"}, 0.0);
  EXPECT_EQ(c.pp_values, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(c.model_ids, (std::vector<std::string>{"y", "z", "x"}));
  EXPECT_EQ(c.filtered, 0u);
}

TEST(CalibrationSet, RejectsBadInput) {
  EXPECT_THROW(make_calibration_set({0.1, 1.2}, {"a", "b"}, 0.2), DomainError);
  EXPECT_THROW(make_calibration_set({0.1, 0.2}, {"a"}, 0.2), DomainError);
  EXPECT_THROW(make_calibration_set({0.1, 0.2}, {"a", "b"}, 1.0), DomainError);
}

TEST(PValue, Examples) {
  const auto c = five();
  EXPECT_EQ(c.filtered, 1u);
  EXPECT_DOUBLE_EQ(p_value(c, 0.45), 1.0);
  EXPECT_DOUBLE_EQ(p_value(c, 0.05), 0.2);
  const auto big = sorted_set(std::vector<double>(100, 0.5), 0.2);
  EXPECT_EQ(big.filtered, 20u);
  EXPECT_DOUBLE_EQ(p_value(big, 0.9), 81.0 / 81.0);
}

TEST(PValue, TiesDoNotCount) {
  const auto c = five();
  EXPECT_DOUBLE_EQ(p_value(c, 0.3), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(p_value(c, 0.1), 1.0 / 5.0);
  EXPECT_FALSE(verify(c, 0.4, 0.05).trained_on_protected);
  EXPECT_TRUE(verify(c, std::nextafter(0.4, 1.0), 0.05).trained_on_protected);
}

TEST(PValue, NondecreasingAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t j = 2 + rng() % 60;
    std::vector<double> v(j);
    for (double& x : v) x = u(rng);
    const auto c = sorted_set(v, 0.3);
    const double lo = 1.0 / static_cast<double>(j - c.filtered + 1);
    double prev = 0;
    for (int i = 0; i <= 200; ++i) {
      const double p = p_value(c, i / 200.0);
      ASSERT_GE(p, prev);
      ASSERT_GE(p, lo - 1e-15);
      ASSERT_LE(p, 1.0);
      prev = p;
    }
  }
}

TEST(Threshold, Examples) {
  EXPECT_EQ(threshold_index(100, 20, 0.05), 76u);
  std::vector<double> v(100);
  for (std::size_t i = 0; i < 100; ++i) v[i] = (99 - i) / 100.0;
  EXPECT_DOUBLE_EQ(calibration_threshold(sorted_set(v, 0.2), 0.05), 0.75);
  EXPECT_EQ(threshold_index(5, 1, 0.05), 4u);
  EXPECT_DOUBLE_EQ(calibration_threshold(five(), 0.05), 0.4);
  EXPECT_EQ(threshold_index(3, 0, 0.5), 1u);
  EXPECT_DOUBLE_EQ(calibration_threshold(sorted_set({0.9, 0.2, 0.7}, 0.0), 0.5), 0.2);
}

TEST(Threshold, TooSmallForSignificance) {
  EXPECT_THROW(threshold_index(2, 0, 0.9), InsufficientCalibrationError);
  EXPECT_THROW(calibration_threshold(sorted_set({0.1, 0.2}, 0.0), 0.9), InsufficientCalibrationError);
  EXPECT_THROW(threshold_index(5, 1, 0.0), DomainError);
}

TEST(Verify, Examples) {
  const auto c = five();
  const auto pos = verify(c, 0.45, 0.05);
  EXPECT_TRUE(pos.trained_on_protected);
  EXPECT_DOUBLE_EQ(pos.p_value, 1.0);
  EXPECT_DOUBLE_EQ(pos.threshold, 0.4);
  const auto neg = verify(c, 0.05, 0.05);
  EXPECT_FALSE(neg.trained_on_protected);
  EXPECT_DOUBLE_EQ(neg.p_value, 0.2);
}

TEST(Verify, MatchesThresholdRuleInGeneralPosition) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t j = 3 + rng() % 120;
    const double kappa = std::uniform_real_distribution<double>(0, 0.5)(rng);
    const double alpha0 = std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    std::vector<double> v(j);
    for (double& x : v) x = u(rng);
    const auto c = sorted_set(v, kappa);
    const std::size_t kept = j - c.filtered;
    if (kept < 1 || kept < static_cast<std::size_t>(std::floor(alpha0 * (kept + 1))) + 1) continue;
    double w = u(rng);
    while (std::find(v.begin(), v.end(), w) != v.end()) w = u(rng);
    const auto d = verify(c, w, alpha0);
    if (d.trained_on_protected != (w > d.threshold)) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0u);
}

// Two-class rule on a scalar input: class 1 iff x > cut.
Classifier step(double cut) {
  return Classifier::linear(Shape{1, 1, 1}, 2, LinearParams{{0.0, 1.0}, {0.0, -cut}});
}

TEST(BuildCalibration, ConstantModelsGiveOnes) {
  const Shape s{1, 1, 1};
  LabeledDataset pool{s, 2, Split::kTest, {ImageTensor(s, 0.1), ImageTensor(s, 0.9)}, {0, 1}};
  std::vector<Classifier> models;
  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) {
    // Every model predicts the pool perfectly but is constant under heavy noise mass.
    models.push_back(step(0.5));
    ids.push_back("c" + std::to_string(i));
  }
  CalibrationBuild b{NoiseSpec::gaussian(1e-9), 32, 0.2, 1, 1};
  const auto c = build_calibration_set(models, ids, pool, b, SeededStream(0));
  EXPECT_EQ(c.size(), 5u);
  EXPECT_EQ(c.filtered, 1u);
  // Tiny noise: each representative keeps its own class, so the average is [0.5, 0.5].
  for (double v : c.pp_values) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(BuildCalibration, OrderOfModelsIsIrrelevant) {
  const Shape s{1, 1, 1};
  LabeledDataset pool{s, 2, Split::kTest, {}, {}};
  for (int i = 0; i < 6; ++i) {
    pool.images.emplace_back(s, 0.05 + 0.02 * i);
    pool.labels.push_back(0);
    pool.images.emplace_back(s, 0.95 - 0.02 * i);
    pool.labels.push_back(1);
  }
  std::vector<Classifier> models;
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) {
    models.push_back(step(0.3 + 0.05 * i));
    ids.push_back("model-" + std::to_string(i));
  }
  CalibrationBuild b{NoiseSpec::gaussian(0.4), 512, 0.25, 1, 2};
  const auto base = build_calibration_set(models, ids, pool, b, SeededStream(77));
  EXPECT_EQ(base.filtered, 2u);
  EXPECT_TRUE(std::is_sorted(base.pp_values.begin(), base.pp_values.end()));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> order(models.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Classifier> pm;
    std::vector<std::string> pid;
    for (auto i : order) {
      pm.push_back(models[i]);
      pid.push_back(ids[i]);
    }
    b.workers = 1 + trial % 3;
    const auto perm = build_calibration_set(pm, pid, pool, b, SeededStream(77));
    EXPECT_EQ(perm.pp_values, base.pp_values);
    EXPECT_EQ(perm.model_ids, base.model_ids);
  }
}

TEST(BuildCalibration, ModelsWithoutRepresentativesAreSkipped) {
  const Shape s{1, 1, 1};
  LabeledDataset pool{s, 2, Split::kTest, {ImageTensor(s, 0.1), ImageTensor(s, 0.9)}, {0, 1}};
  const auto broken = Classifier::table(s, 2, TableParams{1.0, 0, {}});
  CalibrationBuild b{NoiseSpec::gaussian(0.3), 64, 0.0, 1, 1};
  const auto c = build_calibration_set({step(0.5), broken, step(0.4)}, {"a", "b", "c"}, pool, b, SeededStream(5));
  EXPECT_EQ(c.size(), 2u);
  EXPECT_EQ(std::count(c.model_ids.begin(), c.model_ids.end(), "b"), 0);
  EXPECT_THROW(build_calibration_set({step(0.5), broken}, {"a", "b"}, pool, b, SeededStream(5)),
               InsufficientCalibrationError);
}

}  // namespace
}  // namespace certdw
