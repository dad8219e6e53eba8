#include "certdw/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "certdw/error.hpp"
#include "certdw/parallel.hpp"
#include "certdw/stats.hpp"

namespace certdw {
namespace {

// Products such as 0.05 * 20 or 0.2 * 100 are meant as exact integers.
constexpr double kFloorSlack = 1e-9;

void check_alpha(double alpha0) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw DomainError("significance level must lie in (0, 1)");
}

}  // namespace

void CalibrationSet::validate() const {
  if (pp_values.empty()) throw DomainError("calibration set is empty");
  if (!model_ids.empty() && model_ids.size() != pp_values.size()) {
    throw DomainError("calibration set: model ids do not match values");
  }
  if (!std::is_sorted(pp_values.begin(), pp_values.end())) {
    throw DomainError("calibration set: values must be sorted ascending");
  }
  for (double v : pp_values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("calibration set: values must lie in [0, 1]");
  }
  if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError("calibration set: kappa must lie in [0, 1)");
  if (filtered != outlier_count(pp_values.size(), kappa)) {
    throw DomainError("calibration set: filtered count must equal floor(kappa * J)");
  }
}

std::size_t outlier_count(std::size_t calibration_size, double kappa) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in [0, 1)");
  const auto m = static_cast<std::size_t>(std::floor(kappa * static_cast<double>(calibration_size) + kFloorSlack));
  return std::min(m, calibration_size == 0 ? 0 : calibration_size - 1);
}

CalibrationSet make_calibration_set(std::vector<double> pp_values, std::vector<std::string> model_ids,
                                    double kappa) {
  if (model_ids.empty()) {
    model_ids.resize(pp_values.size());
    for (std::size_t i = 0; i < model_ids.size(); ++i) model_ids[i] = "model-" + std::to_string(i);
  }
  if (model_ids.size() != pp_values.size()) {
    throw DomainError("make_calibration_set: model ids do not match values");
  }
  std::vector<std::size_t> order(pp_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pp_values[a] != pp_values[b]) return pp_values[a] < pp_values[b];
    return model_ids[a] < model_ids[b];
  });
  CalibrationSet out;
  out.kappa = kappa;
  for (std::size_t i : order) {
    out.pp_values.push_back(pp_values[i]);
    out.model_ids.push_back(model_ids[i]);
  }
  out.filtered = outlier_count(out.size(), kappa);
  out.validate();
  return out;
}

CalibrationSet build_calibration_set(const std::vector<Classifier>& models,
                                     const std::vector<std::string>& model_ids, const LabeledDataset& pool,
                                     const CalibrationBuild& build, const SeededStream& stream) {
  if (models.size() < 2) throw InsufficientCalibrationError("calibration needs at least two benign models");
  if (model_ids.size() != models.size()) throw DomainError("build_calibration_set: one id per model required");

  std::vector<double> pp(models.size(), -1.0);
  std::vector<std::string> failures(models.size());
  parallel_for(models.size(), build.workers, [&](std::size_t i) {
    const auto model_stream = stream.derive(StreamTag::kModel, {fnv1a64(model_ids[i])});
    try {
      const auto reps = select_class_representatives(
          models[i], pool, model_stream.derive(StreamTag::kRepresentatives), build.per_class, model_ids[i]);
      const SmoothingRun run{build.noise, build.samples, model_stream.derive(StreamTag::kNoise), 1};
      pp[i] = principal_probability(models[i], reps, run);
    } catch (const RepresentativeUnavailableError& e) {
      failures[i] = e.what();
    }
  });

  std::vector<double> values;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (!failures[i].empty()) {
      spdlog::warn("calibration: excluding model {}: {}", model_ids[i], failures[i]);
      continue;
    }
    values.push_back(pp[i]);
    ids.push_back(model_ids[i]);
  }
  if (values.size() < 2) {
    throw InsufficientCalibrationError("calibration: fewer than two benign models admit representatives");
  }
  return make_calibration_set(std::move(values), std::move(ids), build.kappa);
}

double p_value(const CalibrationSet& calib, double watermark_robustness) {
  calib.validate();
  const std::size_t kept = calib.size() - calib.filtered;
  // Strict inequality: calibration values tied with W do not count.
  const auto below = static_cast<std::size_t>(
      std::lower_bound(calib.pp_values.begin(), calib.pp_values.end(), watermark_robustness) -
      calib.pp_values.begin());
  return static_cast<double>(1 + std::min(below, kept)) / static_cast<double>(kept + 1);
}

std::size_t threshold_index(std::size_t calibration_size, std::size_t filtered, double alpha0) {
  check_alpha(alpha0);
  if (filtered >= calibration_size) throw DomainError("threshold_index: filtered count must be below J");
  const std::size_t kept = calibration_size - filtered;
  const auto slack = static_cast<std::size_t>(std::floor(alpha0 * static_cast<double>(kept + 1) + kFloorSlack));
  if (slack >= kept) {
    throw InsufficientCalibrationError("calibration set of " + std::to_string(calibration_size) + " values with " +
                                       std::to_string(filtered) + " outliers is too small for alpha0 = " +
                                       std::to_string(alpha0));
  }
  return kept - slack;
}

double calibration_threshold(const CalibrationSet& calib, double alpha0) {
  calib.validate();
  return calib.pp_values[threshold_index(calib.size(), calib.filtered, alpha0) - 1];
}

Decision verify(const CalibrationSet& calib, double watermark_robustness, double alpha0) {
  check_alpha(alpha0);
  Decision d;
  d.p_value = p_value(calib, watermark_robustness);
  d.threshold = calibration_threshold(calib, alpha0);
  const double kept_plus_one = static_cast<double>(calib.size() - calib.filtered + 1);
  // p >= 1 - alpha0, evaluated as (1 + count) >= (1 - alpha0)(J - m + 1) with
  // the same integer slack as threshold_index.
  d.trained_on_protected = d.p_value * kept_plus_one >= (1.0 - alpha0) * kept_plus_one - kFloorSlack;
  return d;
}

}  // namespace certdw
