#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certdw/classifier.hpp"
#include "certdw/numerics.hpp"
#include "certdw/tensor.hpp"

namespace certdw {

enum class NoiseFamily { kGaussian, kUniform };

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

/// Per-coordinate i.i.d. smoothing noise: N(0, sigma^2) or U[low, high].
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::kGaussian;
  double sigma = 1.0;
  double low = 0.0;
  double high = 1.0;
  /// Clamp noisy inputs to [0, 1] before classification. Off by default:
  /// the smoothed classifier sees x + noise unmodified.
  bool clip = false;

  static NoiseSpec gaussian(double sigma);
  static NoiseSpec uniform(double low, double high);

  /// Throws DomainError if the active family's parameters are invalid.
  void validate() const;
};

/// Noise draws are consumed in blocks of this size; block b of a stream S
/// always uses S.substream(b), independent of how blocks are scheduled.
inline constexpr std::uint64_t kNoiseBlockSize = 256;

/// Fills `out` with i.i.d. draws from the spec using the given engine.
void sample_noise(const NoiseSpec& spec, SeededStream::Engine& engine, std::span<double> out);
ImageTensor sample_noise(const NoiseSpec& spec, const Shape& shape, const SeededStream& stream);

/// Raw Monte Carlo class counts.
struct PredictionCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  PredictionCounts& operator+=(const PredictionCounts& other);
};

/// Monte Carlo estimate of the smoothed prediction distribution: each entry
/// is a count divided by sample_count.
struct PredictionDistribution {
  std::vector<std::uint64_t> counts;
  std::uint64_t sample_count = 0;

  double probability(Label k) const;
  std::vector<double> probabilities() const;
  static PredictionDistribution from_counts(PredictionCounts counts);
};

/// Counts predictions for draws in blocks [first_block, first_block + n)
/// where the final block may be partial so that exactly `draws` noise
/// samples are evaluated. Blocks run on up to `workers` threads; the result
/// is independent of the worker count.
PredictionCounts count_predictions(const Classifier& classifier, const ImageTensor& x,
                                   const NoiseSpec& spec, std::uint64_t draws, const SeededStream& stream,
                                   std::uint64_t first_block = 0, std::size_t workers = 1);

/// probs[k] = (1/M) sum_i 1{predict(x + eps_i) = k}. Throws DomainError if M = 0.
PredictionDistribution estimate_pd(const Classifier& classifier, const ImageTensor& x,
                                   const NoiseSpec& spec, std::uint64_t samples,
                                   const SeededStream& stream, std::size_t workers = 1);

/// Closed-form smoothed positive-class probability of the two-class rule
/// sign(w.(x+eps)+b) under eps ~ N(0, sigma^2 I): Phi((w.x + b) / (sigma ||w||)).
double analytic_pd_linear(std::span<const double> weight, double bias, std::span<const double> x,
                          double sigma);

}  // namespace certdw
