#include "certdw/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "certdw/error.hpp"

namespace certdw {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Acklam's lower-half rational approximation (relative error ~1.15e-9).
double acklam_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_cdf(double z) {
  if (!std::isfinite(z)) {
    throw DomainError("std_normal_cdf: non-finite argument");
  }
  return 0.5 * std::erfc(-z * kInvSqrt2);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_normal_quantile: probability must lie in (0, 1), got " +
                      std::to_string(p));
  }
  // 1 - p is exact for p >= 0.5, so the upper half reuses the lower tail.
  if (p > 0.5) {
    return -std_normal_quantile(1.0 - p);
  }
  double x = acklam_lower(p);
  const double err = 0.5 * std::erfc(-x * kInvSqrt2) - p;
  const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) {
    throw DomainError("argmax_first: empty vector");
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DomainError("argmax_first: non-finite entry");
    }
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

std::vector<double> l2_rescale(std::span<const double> values, double target_norm) {
  if (!(target_norm >= 0.0) || !std::isfinite(target_norm)) {
    throw DomainError("l2_rescale: target norm must be finite and non-negative");
  }
  std::vector<double> out(values.begin(), values.end());
  if (target_norm == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  const double norm = l2_norm(values);
  if (norm == 0.0) {
    throw DegenerateTriggerError("l2_rescale: cannot rescale a zero vector to a positive norm");
  }
  const double scale = target_norm / norm;
  for (double& v : out) {
    v *= scale;
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

SeededStream SeededStream::substream(std::uint64_t key) const {
  return SeededStream(master_seed_, splitmix64(stream_index_ ^ splitmix64(key ^ 0x5851f42d4c957f2dULL)));
}

SeededStream SeededStream::derive(std::initializer_list<std::uint64_t> path) const {
  SeededStream out = *this;
  for (std::uint64_t key : path) {
    out = out.substream(key);
  }
  return out;
}

SeededStream SeededStream::derive(StreamTag tag, std::initializer_list<std::uint64_t> path) const {
  return substream(static_cast<std::uint64_t>(tag)).derive(path);
}

SeededStream::Engine SeededStream::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed_), static_cast<std::uint32_t>(master_seed_ >> 32),
                    static_cast<std::uint32_t>(stream_index_), static_cast<std::uint32_t>(stream_index_ >> 32)};
  return Engine(seq);
}

}  // namespace certdw
