#include <benchmark/benchmark.h>

#include "certdw/conformal.hpp"
#include "certdw/numerics.hpp"
#include "certdw/smoothing.hpp"
#include "certdw/train.hpp"

namespace {

using namespace certdw;

struct ToyFixture {
  LabeledDataset train;
  LabeledDataset test;
  Classifier model;

  static const ToyFixture& get() {
    static const ToyFixture fixture = [] {
      const SeededStream root(7);
      auto [train, test] = gen_toy_dataset(ToyDataConfig{}, root.derive(StreamTag::kData));
      auto model = train_model(train, TrainConfig{}, root.derive(StreamTag::kTrain));
      return ToyFixture{std::move(train), std::move(test), std::move(model)};
    }();
    return fixture;
  }
};

void BM_StdNormalCdf(benchmark::State& state) {
  double z = -6.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_cdf(z));
    z = z > 6.0 ? -6.0 : z + 1e-3;
  }
}
BENCHMARK(BM_StdNormalCdf);

void BM_StdNormalQuantile(benchmark::State& state) {
  double p = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(std_normal_quantile(p));
    p = p > 0.999 ? 1e-6 : p + 1e-4;
  }
}
BENCHMARK(BM_StdNormalQuantile);

void BM_EstimatePd(benchmark::State& state) {
  const auto& f = ToyFixture::get();
  const auto samples = static_cast<std::uint64_t>(state.range(0));
  const auto noise = NoiseSpec::gaussian(0.5);
  std::uint64_t key = 0;
  for (auto _ : state) {
    auto pd = estimate_pd(f.model, f.test.images[0], noise, samples, SeededStream(1).substream(key++));
    benchmark::DoNotOptimize(pd);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EstimatePd)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);

void BM_TrainModel(benchmark::State& state) {
  const auto& f = ToyFixture::get();
  TrainConfig config;
  config.epochs = static_cast<std::size_t>(state.range(0));
  std::uint64_t key = 0;
  for (auto _ : state) {
    auto model = train_model(f.train, config, SeededStream(2).substream(key++));
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(BM_TrainModel)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_VerifyDecision(benchmark::State& state) {
  const auto j = static_cast<std::size_t>(state.range(0));
  std::vector<double> values(j);
  std::vector<std::string> ids(j);
  auto engine = SeededStream(3).engine();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < j; ++i) {
    values[i] = u(engine);
    ids[i] = std::to_string(i);
  }
  const auto calib = make_calibration_set(values, ids, 0.2);
  double w = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(verify(calib, w, 0.05));
    w = w > 1.0 ? 0.0 : w + 1e-3;
  }
}
BENCHMARK(BM_VerifyDecision)->Arg(20)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
