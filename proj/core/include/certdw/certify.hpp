#pragma once

#include <functional>
#include <span>
#include <vector>

namespace certdw {

/// W > Phi(R / sigma) + threshold.
bool gaussian_condition(double watermark_robustness, double radius, double sigma, double threshold);

struct CertifiedRadius {
  enum class Status {
    kNone,       // W - threshold <= 1/2: no positive radius certifies
    kFinite,     // radius = sigma * Phi^{-1}(W - threshold)
    kUnbounded,  // W - threshold >= 1
  };
  Status status = Status::kNone;
  double radius = 0.0;
};

/// Largest radius satisfying gaussian_condition (as a supremum; the condition
/// itself is strict).
CertifiedRadius gaussian_certified_radius(double watermark_robustness, double sigma, double threshold);

/// W > threshold + 1 - prod_{k=1..K} (1 - R / (high - low))_+.
bool uniform_condition(double watermark_robustness, double radius, double low, double high, std::size_t num_classes,
                       double threshold);

/// Optimal type-II error of the likelihood-ratio test at significance 1 - W
/// for Gaussian smoothing: Phi(Phi^{-1}(W) - sqrt(sum_k ||r_k||^2) / sigma).
/// W = 0 returns 0 and W = 1 returns 1.
double beta2_star_gaussian(double watermark_robustness, std::span<const double> residual_norms, double sigma);

/// Uniform smoothing counterpart: W - b0 with
/// b0 = 1 - prod_k (1 - |r_k| / (high - low))_+, and 0 when W < b0.
double beta2_star_uniform(double watermark_robustness, std::span<const double> residual_magnitudes, double low,
                          double high);

/// beta2_star > threshold.
bool generic_condition(double beta2_star, double threshold);

/// min(W, S) > tau.
bool tau_certified(double watermark_robustness, double stability, double tau);

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct RegionPoint {
  double radius = 0.0;
  double robustness = 0.0;
  bool certified = false;
};

/// Grid evaluation of a certification condition over an (R, W) rectangle.
///
/// `area` is the fraction of grid points inside the region, i.e. the covered
/// share of the plotted rectangle normalized to unit area.
struct CertifiedRegion {
  Range radius_range;
  Range robustness_range;
  std::size_t grid_n = 0;
  std::vector<RegionPoint> points;                   // row-major, R varies fastest
  std::vector<std::pair<double, double>> boundary;   // (R, W on the boundary)
  double area = 0.0;
};

/// Boundary W(R) above which a point is certified.
using BoundaryFn = std::function<double(double)>;

CertifiedRegion certified_region(const BoundaryFn& boundary, Range radius_range, Range robustness_range,
                                 std::size_t grid_n);
CertifiedRegion gaussian_certified_region(double sigma, double threshold, Range radius_range,
                                          Range robustness_range, std::size_t grid_n);
CertifiedRegion uniform_certified_region(double low, double high, std::size_t num_classes, double threshold,
                                         Range radius_range, Range robustness_range, std::size_t grid_n);

struct RobustnessPoint {
  double radius = 0.0;
  double robustness = 0.0;
};

/// Fraction of (R, W) points satisfying gaussian_condition.
double wca(std::span<const RobustnessPoint> points, double sigma, double threshold);

}  // namespace certdw
