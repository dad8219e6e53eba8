#include "certdw/certify.hpp"

#include <algorithm>
#include <cmath>

#include "certdw/error.hpp"
#include "certdw/numerics.hpp"

namespace certdw {
namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be positive and finite");
}

void check_radius(double radius) {
  if (!(radius >= 0.0)) throw DomainError("radius must be non-negative");
}

double uniform_overlap(std::span<const double> magnitudes, double width) {
  double product = 1.0;
  for (double r : magnitudes) product *= std::max(0.0, 1.0 - std::abs(r) / width);
  return product;
}

}  // namespace

bool gaussian_condition(double watermark_robustness, double radius, double sigma, double threshold) {
  check_sigma(sigma);
  check_radius(radius);
  if (std::isinf(radius)) return false;
  return watermark_robustness > std_normal_cdf(radius / sigma) + threshold;
}

CertifiedRadius gaussian_certified_radius(double watermark_robustness, double sigma, double threshold) {
  check_sigma(sigma);
  const double margin = watermark_robustness - threshold;
  if (margin <= 0.5) return {CertifiedRadius::Status::kNone, 0.0};
  if (margin >= 1.0) return {CertifiedRadius::Status::kUnbounded, 0.0};
  return {CertifiedRadius::Status::kFinite, sigma * std_normal_quantile(margin)};
}

bool uniform_condition(double watermark_robustness, double radius, double low, double high, std::size_t num_classes,
                       double threshold) {
  if (!(high > low)) throw DomainError("uniform_condition: need low < high");
  check_radius(radius);
  if (num_classes == 0) throw DomainError("uniform_condition: need K >= 1");
  const double factor = std::max(0.0, 1.0 - radius / (high - low));
  const double bound = threshold + 1.0 - std::pow(factor, static_cast<double>(num_classes));
  return watermark_robustness > bound;
}

double beta2_star_gaussian(double watermark_robustness, std::span<const double> residual_norms, double sigma) {
  check_sigma(sigma);
  if (!(watermark_robustness >= 0.0 && watermark_robustness <= 1.0)) {
    throw DomainError("beta2_star_gaussian: W must lie in [0, 1]");
  }
  if (watermark_robustness == 0.0) return 0.0;
  if (watermark_robustness == 1.0) return 1.0;
  double sum_sq = 0.0;
  for (double r : residual_norms) sum_sq += r * r;
  return std_normal_cdf(std_normal_quantile(watermark_robustness) - std::sqrt(sum_sq) / sigma);
}

double beta2_star_uniform(double watermark_robustness, std::span<const double> residual_magnitudes, double low,
                          double high) {
  if (!(high > low)) throw DomainError("beta2_star_uniform: need low < high");
  const double b0 = 1.0 - uniform_overlap(residual_magnitudes, high - low);
  if (watermark_robustness < b0) return 0.0;
  return watermark_robustness - b0;
}

bool generic_condition(double beta2_star, double threshold) { return beta2_star > threshold; }

bool tau_certified(double watermark_robustness, double stability, double tau) {
  return std::min(watermark_robustness, stability) > tau;
}

CertifiedRegion certified_region(const BoundaryFn& boundary, Range radius_range, Range robustness_range,
                                 std::size_t grid_n) {
  if (grid_n < 2) throw DomainError("certified_region: grid_n must be at least 2");
  if (!(radius_range.hi > radius_range.lo) || !(robustness_range.hi > robustness_range.lo)) {
    throw DomainError("certified_region: empty range");
  }
  if (radius_range.lo < 0.0) throw DomainError("certified_region: negative radius");

  CertifiedRegion region;
  region.radius_range = radius_range;
  region.robustness_range = robustness_range;
  region.grid_n = grid_n;
  region.points.reserve(grid_n * grid_n);
  const double step_r = (radius_range.hi - radius_range.lo) / static_cast<double>(grid_n - 1);
  const double step_w = (robustness_range.hi - robustness_range.lo) / static_cast<double>(grid_n - 1);

  std::vector<double> bound(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double r = radius_range.lo + step_r * static_cast<double>(i);
    bound[i] = boundary(r);
    region.boundary.emplace_back(r, bound[i]);
  }
  std::size_t inside = 0;
  for (std::size_t j = 0; j < grid_n; ++j) {
    const double w = robustness_range.lo + step_w * static_cast<double>(j);
    for (std::size_t i = 0; i < grid_n; ++i) {
      const bool ok = w > bound[i];
      inside += ok ? 1 : 0;
      region.points.push_back({region.boundary[i].first, w, ok});
    }
  }
  region.area = static_cast<double>(inside) / static_cast<double>(grid_n * grid_n);
  return region;
}

CertifiedRegion gaussian_certified_region(double sigma, double threshold, Range radius_range,
                                          Range robustness_range, std::size_t grid_n) {
  check_sigma(sigma);
  return certified_region([&](double r) { return std_normal_cdf(r / sigma) + threshold; }, radius_range,
                          robustness_range, grid_n);
}

CertifiedRegion uniform_certified_region(double low, double high, std::size_t num_classes, double threshold,
                                         Range radius_range, Range robustness_range, std::size_t grid_n) {
  if (!(high > low)) throw DomainError("uniform_certified_region: need low < high");
  return certified_region(
      [&](double r) {
        const double factor = std::max(0.0, 1.0 - r / (high - low));
        return threshold + 1.0 - std::pow(factor, static_cast<double>(num_classes));
      },
      radius_range, robustness_range, grid_n);
}

double wca(std::span<const RobustnessPoint> points, double sigma, double threshold) {
  if (points.empty()) throw DomainError("wca: no points");
  std::size_t inside = 0;
  for (const auto& p : points) {
    if (gaussian_condition(p.robustness, p.radius, sigma, threshold)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(points.size());
}

}  // namespace certdw
