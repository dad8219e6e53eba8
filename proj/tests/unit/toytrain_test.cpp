#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "certdw/dataset.hpp"
#include "certdw/error.hpp"
#include "certdw/train.hpp"

namespace certdw {
namespace {

double sq_dist(const ImageTensor& a, const ImageTensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return s;
}

std::vector<std::size_t> class_counts(const LabeledDataset& d) {
  std::vector<std::size_t> c(d.num_classes, 0);
  for (auto y : d.labels) ++c[y];
  return c;
}

TEST(ToyData, CountsAndSplit) {
  ToyDataConfig cfg;
  cfg.per_class = 50;
  const auto [train, test] = gen_toy_dataset(cfg, SeededStream(1));
  EXPECT_EQ(train.size() + test.size(), 200u);
  EXPECT_EQ(class_counts(train), (std::vector<std::size_t>(4, 40)));
  EXPECT_EQ(class_counts(test), (std::vector<std::size_t>(4, 10)));
  EXPECT_EQ(train.split, Split::kTrain);
  EXPECT_EQ(test.split, Split::kTest);
  for (const auto* d : {&train, &test}) {
    for (const auto& x : d->images) {
      for (double v : x.values) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        ASSERT_EQ(static_cast<double>(static_cast<float>(v)), v);
      }
    }
  }
}

TEST(ToyData, ZeroNoiseGivesIdenticalClassSamples) {
  ToyDataConfig cfg{3, 10, Shape{1, 4, 4}, 0.0};
  const auto [train, test] = gen_toy_dataset(cfg, SeededStream(2));
  const auto means = toy_class_means(cfg, SeededStream(2));
  for (const auto* d : {&train, &test}) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      for (std::size_t j = 0; j < means[0].values.size(); ++j) {
        EXPECT_EQ(d->images[i].values[j], static_cast<double>(static_cast<float>(means[d->labels[i]].values[j])));
      }
    }
  }
}

TEST(ToyData, NearestCentroidSeparates) {
  ToyDataConfig cfg{4, 100, Shape{3, 8, 8}, 0.05};
  const auto means = toy_class_means(cfg, SeededStream(3));
  const double d = static_cast<double>(cfg.shape.size());
  for (std::size_t a = 0; a < means.size(); ++a) {
    for (std::size_t b = a + 1; b < means.size(); ++b) {
      ASSERT_GE(std::sqrt(sq_dist(means[a], means[b])), 4 * cfg.noise_std * std::sqrt(d));
    }
  }
  const auto [train, test] = gen_toy_dataset(cfg, SeededStream(3));
  std::size_t correct = 0, total = 0;
  for (const auto* set : {&train, &test}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < means.size(); ++k) {
        if (sq_dist(set->images[i], means[k]) < sq_dist(set->images[i], means[best])) best = k;
      }
      correct += best == set->labels[i];
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.99);
}

TEST(ToyData, RejectsBadConfig) {
  EXPECT_THROW(gen_toy_dataset(ToyDataConfig{1, 10, Shape{1, 2, 2}, 0.1}, SeededStream(0)), DomainError);
  EXPECT_THROW(gen_toy_dataset(ToyDataConfig{2, 1, Shape{1, 2, 2}, 0.1}, SeededStream(0)), DomainError);
}

TEST(ToyData, DirectoryRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "certdw_toy_roundtrip";
  std::filesystem::remove_all(dir);
  const auto [train, test] = gen_toy_dataset(ToyDataConfig{3, 6, Shape{2, 3, 3}, 0.2}, SeededStream(4));
  save_dataset(test, dir);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.shape, test.shape);
  EXPECT_EQ(back.num_classes, 3u);
  EXPECT_EQ(back.split, Split::kTest);
  EXPECT_EQ(back.images, test.images);
  EXPECT_EQ(back.labels, test.labels);
  EXPECT_EQ(std::filesystem::file_size(dir / "data.f32le"), test.size() * 18 * 4);
  EXPECT_EQ(std::filesystem::file_size(dir / "labels.u32le"), test.size() * 4);
  std::filesystem::remove(dir / "labels.u32le");
  EXPECT_THROW(load_dataset(dir), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Train, LogisticSeparatesTwoBlobs) {
  const auto [train, test] = gen_toy_dataset(ToyDataConfig{2, 100, Shape{1, 4, 4}, 0.1}, SeededStream(5));
  TrainConfig cfg;
  cfg.arch = Architecture::kLogistic;
  cfg.epochs = 50;
  const auto model = train_model(train, cfg, SeededStream(6));
  EXPECT_EQ(model.kind(), ClassifierKind::kLinear);
  EXPECT_GE(evaluate_ba(model, train), 0.95);
  EXPECT_GE(evaluate_ba(model, test), 0.95);
}

TEST(Train, ZeroEpochsReturnsSeededInit) {
  const auto [a, unused_a] = gen_toy_dataset(ToyDataConfig{3, 10, Shape{1, 3, 3}, 0.1}, SeededStream(7));
  const auto [b, unused_b] = gen_toy_dataset(ToyDataConfig{3, 10, Shape{1, 3, 3}, 0.1}, SeededStream(8));
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.hidden = 5;
  const auto ma = train_model(a, cfg, SeededStream(9));
  const auto mb = train_model(b, cfg, SeededStream(9));
  EXPECT_EQ(ma.mlp_params().w1, mb.mlp_params().w1);
  EXPECT_EQ(ma.mlp_params().w2, mb.mlp_params().w2);
  const auto mc = train_model(a, cfg, SeededStream(10));
  EXPECT_NE(ma.mlp_params().w1, mc.mlp_params().w1);
}

TEST(Train, BitIdenticalForEqualStreams) {
  const auto [train, test] = gen_toy_dataset(ToyDataConfig{4, 20, Shape{3, 4, 4}, 0.1}, SeededStream(11));
  for (auto arch : {Architecture::kLogistic, Architecture::kMlp}) {
    TrainConfig cfg;
    cfg.arch = arch;
    cfg.epochs = 5;
    cfg.hidden = 8;
    const auto x = train_model(train, cfg, SeededStream(12));
    const auto y = train_model(train, cfg, SeededStream(12));
    if (arch == Architecture::kMlp) {
      EXPECT_EQ(x.mlp_params().w1, y.mlp_params().w1);
      EXPECT_EQ(x.mlp_params().b1, y.mlp_params().b1);
      EXPECT_EQ(x.mlp_params().w2, y.mlp_params().w2);
      EXPECT_EQ(x.mlp_params().b2, y.mlp_params().b2);
    } else {
      EXPECT_EQ(x.linear_params().weight, y.linear_params().weight);
      EXPECT_EQ(x.linear_params().bias, y.linear_params().bias);
    }
  }
}

TEST(Train, DivergenceIsReported) {
  const auto [train, test] = gen_toy_dataset(ToyDataConfig{2, 10, Shape{1, 2, 2}, 0.1}, SeededStream(13));
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.epochs = 5;
  EXPECT_THROW(train_model(train, cfg, SeededStream(1)), TrainingFailureError);
  EXPECT_THROW(train_model(LabeledDataset{Shape{1, 2, 2}, 2, Split::kTrain, {}, {}}, TrainConfig{}, SeededStream(1)),
               DomainError);
}

TEST(Evaluate, PerfectAndConstantModels) {
  const Shape s{1, 1, 1};
  TableParams p{1.0, 0, {}};
  p.cells[{1}] = 1;
  p.cells[{2}] = 2;
  const auto perfect = Classifier::table(s, 3, p);
  LabeledDataset d{s, 3, Split::kTest, {ImageTensor(s, 0.5), ImageTensor(s, 1.5), ImageTensor(s, 2.5)}, {0, 1, 2}};
  EXPECT_EQ(evaluate_ba(perfect, d), 1.0);

  TriggerSpec t;
  t.kind = TriggerKind::kBlendedNoise;
  t.shape = s;
  t.mask = {0.0};
  t.pattern = {0.1};
  t.target_label = 1;
  EXPECT_EQ(evaluate_wsr(Classifier::table(s, 3, TableParams{1.0, 1, {}}), d, t), 1.0);
  EXPECT_EQ(evaluate_wsr(Classifier::table(s, 3, TableParams{1.0, 0, {}}), d, t), 0.0);
  EXPECT_DOUBLE_EQ(evaluate_ba(Classifier::table(s, 3, TableParams{1.0, 0, {}}), d), 1.0 / 3);
  EXPECT_THROW(evaluate_ba(perfect, LabeledDataset{s, 3, Split::kTest, {}, {}}), DomainError);
  EXPECT_THROW(evaluate_wsr(perfect, LabeledDataset{s, 3, Split::kTest, {}, {}}, t), DomainError);
}

TEST(Evaluate, PoisonedModelLearnsTrigger) {
  const ToyDataConfig data_cfg;
  const auto [train, test] = gen_toy_dataset(data_cfg, SeededStream(20));
  const auto t = make_badnets_trigger(data_cfg.shape, 3, 1, SeededStream(21));
  const auto poisoned = poison_dataset(train, t, 0.1, SeededStream(22));
  const auto model = train_model(poisoned.data, TrainConfig{}, SeededStream(23));
  EXPECT_GE(evaluate_wsr(model, test, t), 0.9);
  EXPECT_GE(evaluate_ba(model, test), 0.9);
}

}  // namespace
}  // namespace certdw
