#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace certdw {

/// Standard normal CDF. Throws DomainError for non-finite input.
double std_normal_cdf(double z);

/// Inverse of std_normal_cdf on the open interval (0, 1).
///
/// Acklam's rational approximation followed by one Halley step against
/// std_normal_cdf; the residual |cdf(result) - p| stays below 1e-12 across
/// [1e-300, 1 - 1e-16]. Throws DomainError unless 0 < p < 1.
double std_normal_quantile(double p);

/// Index of the first maximal entry. Throws DomainError on empty or
/// non-finite input.
std::size_t argmax_first(std::span<const double> values);

double l2_norm(std::span<const double> values);

/// Returns values scaled to have the given Euclidean norm. A zero vector with
/// a positive target raises DegenerateTriggerError.
std::vector<double> l2_rescale(std::span<const double> values, double target_norm);

/// 64-bit FNV-1a; used to turn identifiers into stream keys.
std::uint64_t fnv1a64(std::string_view text);

/// Substream tags; the first element of every derivation path.
enum class StreamTag : std::uint64_t {
  kData = 1,
  kTrigger = 2,
  kPoison = 3,
  kTrain = 4,
  kRepresentatives = 5,
  kNoise = 6,
  kSweep = 7,
  kModel = 8,
};

/// A reproducible random stream identified by (master_seed, stream_index).
///
/// Streams are values: deriving a child never mutates the parent, and the
/// engine is rebuilt from the pair on demand. Child indices are produced by
/// SplitMix64 mixing of the parent index with the path, so a task keyed by
/// (kind, model, sample, block) gets the same draws no matter which worker
/// evaluates it or in which order.
class SeededStream {
 public:
  using Engine = std::mt19937_64;

  explicit SeededStream(std::uint64_t master_seed, std::uint64_t stream_index = 0)
      : master_seed_(master_seed), stream_index_(stream_index) {}

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }

  SeededStream substream(std::uint64_t key) const;
  SeededStream derive(std::initializer_list<std::uint64_t> path) const;
  SeededStream derive(StreamTag tag, std::initializer_list<std::uint64_t> path = {}) const;

  /// Fresh engine positioned at the start of this stream.
  Engine engine() const;

  friend bool operator==(const SeededStream&, const SeededStream&) = default;

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
};

}  // namespace certdw
