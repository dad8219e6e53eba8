#include "certdw/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "certdw/error.hpp"
#include "certdw/parallel.hpp"

namespace certdw {

std::string to_string(NoiseFamily family) {
  return family == NoiseFamily::kGaussian ? "gaussian" : "uniform";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::kGaussian;
  if (name == "uniform") return NoiseFamily::kUniform;
  throw DomainError("unknown noise family '" + name + "'");
}

NoiseSpec NoiseSpec::gaussian(double sigma) {
  NoiseSpec spec;
  spec.family = NoiseFamily::kGaussian;
  spec.sigma = sigma;
  spec.validate();
  return spec;
}

NoiseSpec NoiseSpec::uniform(double low, double high) {
  NoiseSpec spec;
  spec.family = NoiseFamily::kUniform;
  spec.low = low;
  spec.high = high;
  spec.validate();
  return spec;
}

void NoiseSpec::validate() const {
  if (family == NoiseFamily::kGaussian) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw DomainError("noise spec: gaussian sigma must be positive and finite");
    }
  } else if (!(high > low) || !std::isfinite(low) || !std::isfinite(high)) {
    throw DomainError("noise spec: uniform bounds need low < high");
  }
}

void sample_noise(const NoiseSpec& spec, SeededStream::Engine& engine, std::span<double> out) {
  if (spec.family == NoiseFamily::kGaussian) {
    std::normal_distribution<double> dist(0.0, spec.sigma);
    for (double& v : out) v = dist(engine);
  } else {
    std::uniform_real_distribution<double> dist(spec.low, spec.high);
    for (double& v : out) v = dist(engine);
  }
}

ImageTensor sample_noise(const NoiseSpec& spec, const Shape& shape, const SeededStream& stream) {
  spec.validate();
  ImageTensor out(shape, 0.0);
  auto engine = stream.engine();
  sample_noise(spec, engine, out.values);
  return out;
}

PredictionCounts& PredictionCounts::operator+=(const PredictionCounts& other) {
  if (counts.size() < other.counts.size()) counts.resize(other.counts.size(), 0);
  for (std::size_t k = 0; k < other.counts.size(); ++k) counts[k] += other.counts[k];
  total += other.total;
  return *this;
}

double PredictionDistribution::probability(Label k) const {
  if (k >= counts.size()) {
    throw DomainError("prediction distribution: label out of range");
  }
  return static_cast<double>(counts[k]) / static_cast<double>(sample_count);
}

std::vector<double> PredictionDistribution::probabilities() const {
  std::vector<double> out(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[k] = static_cast<double>(counts[k]) / static_cast<double>(sample_count);
  }
  return out;
}

PredictionDistribution PredictionDistribution::from_counts(PredictionCounts counts) {
  if (counts.total == 0) {
    throw DomainError("prediction distribution: no samples");
  }
  return PredictionDistribution{std::move(counts.counts), counts.total};
}

PredictionCounts count_predictions(const Classifier& classifier, const ImageTensor& x,
                                   const NoiseSpec& spec, std::uint64_t draws, const SeededStream& stream,
                                   std::uint64_t first_block, std::size_t workers) {
  spec.validate();
  require_shape(x, classifier.input_shape(), "count_predictions");
  const std::size_t k = classifier.num_classes();
  const std::uint64_t blocks = (draws + kNoiseBlockSize - 1) / kNoiseBlockSize;

  std::vector<PredictionCounts> partial(blocks);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::uint64_t begin = b * kNoiseBlockSize;
    const std::uint64_t n = std::min<std::uint64_t>(kNoiseBlockSize, draws - begin);
    auto engine = stream.substream(first_block + b).engine();
    std::vector<double> noisy(x.values.size());
    PredictionCounts local{std::vector<std::uint64_t>(k, 0), n};
    for (std::uint64_t i = 0; i < n; ++i) {
      sample_noise(spec, engine, noisy);
      for (std::size_t j = 0; j < noisy.size(); ++j) noisy[j] += x.values[j];
      if (spec.clip) clip_unit(noisy);
      ++local.counts[classifier.predict_flat(noisy)];
    }
    partial[b] = std::move(local);
  });

  PredictionCounts total{std::vector<std::uint64_t>(k, 0), 0};
  for (const auto& p : partial) total += p;
  return total;
}

PredictionDistribution estimate_pd(const Classifier& classifier, const ImageTensor& x,
                                   const NoiseSpec& spec, std::uint64_t samples,
                                   const SeededStream& stream, std::size_t workers) {
  if (samples == 0) {
    throw DomainError("estimate_pd: sample count must be at least 1");
  }
  return PredictionDistribution::from_counts(
      count_predictions(classifier, x, spec, samples, stream, 0, workers));
}

double analytic_pd_linear(std::span<const double> weight, double bias, std::span<const double> x,
                          double sigma) {
  if (weight.size() != x.size()) {
    throw DomainError("analytic_pd_linear: dimension mismatch");
  }
  if (!(sigma > 0.0)) {
    throw DomainError("analytic_pd_linear: sigma must be positive");
  }
  const double norm = l2_norm(weight);
  if (norm == 0.0) {
    throw DomainError("analytic_pd_linear: zero weight vector");
  }
  double margin = bias;
  for (std::size_t i = 0; i < x.size(); ++i) margin += weight[i] * x[i];
  return std_normal_cdf(margin / (sigma * norm));
}

}  // namespace certdw
