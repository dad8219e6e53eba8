#pragma once

// Reference implementations used only by tests. None of them shares code
// with the library.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "certdw/classifier.hpp"
#include "certdw/tensor.hpp"

namespace certdw::testing {

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)).
// All terms are positive, so the sum is accurate in long double.
inline long double erf_series(long double x) {
  if (x < 0) return -erf_series(-x);
  const long double pi = 3.141592653589793238462643383279502884L;
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 400; ++n) {
    term *= 2.0L * x * x / (2.0L * n + 1.0L);
    sum += term;
    if (term < sum * 1e-22L) break;
  }
  return 2.0L / std::sqrt(pi) * std::exp(-x * x) * sum;
}

inline double phi_oracle(double z) {
  const long double e = erf_series(std::fabs(static_cast<long double>(z)) / std::sqrt(2.0L));
  const long double upper = 0.5L * (1.0L - e);
  return static_cast<double>(z >= 0 ? 1.0L - upper : upper);
}

// Bisection on phi_oracle.
inline double quantile_oracle(double p, double tol = 1e-13) {
  double lo = -40.0;
  double hi = 40.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (phi_oracle(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Direct matrix products over the stored parameters.
inline std::vector<double> mlp_logits_oracle(const MlpParams& p, std::size_t k, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<double> hidden(p.hidden);
  for (std::size_t j = 0; j < p.hidden; ++j) {
    long double s = p.b1[j];
    for (std::size_t i = 0; i < d; ++i) s += static_cast<long double>(p.w1[j * d + i]) * x[i];
    hidden[j] = s > 0 ? static_cast<double>(s) : 0.0;
  }
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    long double s = p.b2[c];
    for (std::size_t j = 0; j < p.hidden; ++j) s += static_cast<long double>(p.w2[c * p.hidden + j]) * hidden[j];
    out[c] = static_cast<double>(s);
  }
  return out;
}

inline double cross_entropy_oracle(const std::vector<double>& z, std::size_t label) {
  long double m = z[0];
  for (double v : z) m = std::max<long double>(m, v);
  long double norm = 0;
  for (double v : z) norm += std::exp(static_cast<long double>(v) - m);
  return static_cast<double>(-(z[label] - m - std::log(norm)));
}

// Central differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace certdw::testing
