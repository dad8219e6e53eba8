#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certdw/classifier.hpp"
#include "certdw/dataset.hpp"
#include "certdw/smoothing.hpp"

namespace certdw {

/// Principal-probability scores of J benign models, sorted ascending.
/// `filtered` = floor(kappa * J) largest values count as outliers.
struct CalibrationSet {
  std::vector<double> pp_values;
  std::vector<std::string> model_ids;  // parallel to pp_values
  double kappa = 0.2;
  std::size_t filtered = 0;

  std::size_t size() const noexcept { return pp_values.size(); }
  void validate() const;
};

/// floor(kappa * J), tolerant of products that land a hair below an integer.
std::size_t outlier_count(std::size_t calibration_size, double kappa);

/// Sorts (value, id) pairs and fills `filtered`.
CalibrationSet make_calibration_set(std::vector<double> pp_values, std::vector<std::string> model_ids,
                                    double kappa);

struct CalibrationBuild {
  NoiseSpec noise;
  std::uint64_t samples = 1024;
  double kappa = 0.2;
  std::size_t per_class = 1;
  std::size_t workers = 1;
};

/// One principal probability per model. Each model's representatives and
/// noise come from substreams keyed by its id, so the result does not depend
/// on the order of `models`. Models without representatives are skipped with
/// a warning; fewer than two survivors raise InsufficientCalibrationError.
CalibrationSet build_calibration_set(const std::vector<Classifier>& models,
                                     const std::vector<std::string>& model_ids, const LabeledDataset& pool,
                                     const CalibrationBuild& build, const SeededStream& stream);

/// Conformal p-value (1 + min{#{j : P_j < W}, J - m}) / (J - m + 1).
double p_value(const CalibrationSet& calib, double watermark_robustness);

/// 1-based order-statistic index J - m - floor(alpha0 (J - m + 1)). Throws
/// InsufficientCalibrationError when it falls below 1.
std::size_t threshold_index(std::size_t calibration_size, std::size_t filtered, double alpha0);

/// The threshold_index-th smallest calibration value.
double calibration_threshold(const CalibrationSet& calib, double alpha0);

struct Decision {
  double p_value = 0.0;
  double threshold = 0.0;
  bool trained_on_protected = false;
};

/// Positive iff p >= 1 - alpha0.
Decision verify(const CalibrationSet& calib, double watermark_robustness, double alpha0);

}  // namespace certdw
