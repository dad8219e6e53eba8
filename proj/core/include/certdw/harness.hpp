#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "certdw/certify.hpp"
#include "certdw/classifier.hpp"
#include "certdw/conformal.hpp"
#include "certdw/dataset.hpp"
#include "certdw/train.hpp"
#include "certdw/watermark.hpp"

namespace certdw {

inline constexpr int kReportSchemaVersion = 1;

/// Toy-scale experiment protocol: M = 1024, kappa = 0.2, alpha0 = 0.05,
/// rate = 0.1, blend alpha = 0.2 and 3x3 patches by default, with
/// desk-sized model populations.
struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::size_t benign_models = 20;
  std::size_t watermarked_models = 10;
  std::size_t independent_models = 10;
  std::vector<double> sigmas{0.5};
  std::uint64_t samples = 1024;
  double kappa = 0.2;
  double alpha0 = 0.05;
  TriggerKind trigger = TriggerKind::kBadNetsPatch;
  double l2_budget = 0.6;
  std::size_t patch_size = kDefaultPatchSize;
  double blend_alpha = kDefaultBlendAlpha;
  Label target_label = 1;
  double watermark_rate = 0.1;
  std::size_t samples_per_class = 1;
  ToyDataConfig data;
  TrainConfig train;
  Range region_radius{0.0, 2.0};
  Range region_robustness{0.0, 1.0};
  std::size_t region_grid = 50;

  /// Throws DomainError on invalid counts or probabilities.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

std::string config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys raise IoError.
ExperimentConfig config_from_json(const std::string& text);

enum class ModelRole { kBenign, kWatermarked, kIndependent };
std::string to_string(ModelRole role);
ModelRole model_role_from_string(const std::string& name);

struct ModelRecord {
  std::string id;
  ModelRole role = ModelRole::kBenign;
  std::string trigger_id;  // empty for benign models
  double ba = 0.0;
  std::optional<double> wsr;
  friend bool operator==(const ModelRecord&, const ModelRecord&) = default;
};

/// One suspicious model evaluated at one noise level.
///
/// `verified` is the conformal decision p >= 1 - alpha0 on W; `stability_pass`
/// is S > threshold; `tau_certified` is min(W, S) > threshold; `certified` is
/// the Gaussian condition W > Phi(R / sigma) + threshold.
struct TrialRecord {
  std::string model_id;
  ModelRole role = ModelRole::kWatermarked;
  std::string trigger_id;
  double w = 0.0;
  double s = 0.0;
  double r = 0.0;
  double p = 0.0;
  double threshold = 0.0;
  bool verified = false;
  bool stability_pass = false;
  bool tau_certified = false;
  bool certified = false;
  std::string error;  // non-empty when the trial failed; excluded from aggregates
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Rates over successful trials. Rates over an empty population are absent.
///
/// vsr / fpr use the stability statistic against the calibration threshold
/// (watermarked / independent populations); verification_rate /
/// independent_verification_rate use the conformal decision on W.
struct Aggregates {
  std::optional<double> vsr;
  std::optional<double> verification_rate;
  std::optional<double> tau_certified_rate;
  std::optional<double> wca;
  std::optional<double> fpr;
  std::optional<double> independent_verification_rate;
  std::size_t watermarked_trials = 0;
  std::size_t independent_trials = 0;
  std::size_t failed_trials = 0;
  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

Aggregates compute_aggregates(const std::vector<TrialRecord>& trials, double sigma);

struct NoiseLevelResult {
  double sigma = 0.0;
  std::vector<double> calibration_values;
  std::vector<std::string> calibration_ids;
  std::size_t filtered = 0;
  std::size_t threshold_index = 0;
  double threshold = 0.0;
  double region_area = 0.0;
  std::vector<TrialRecord> trials;  // sorted by model id
  Aggregates aggregates;
  friend bool operator==(const NoiseLevelResult&, const NoiseLevelResult&) = default;
};

/// Model-population summaries, identical across noise levels.
struct PopulationSummary {
  std::optional<double> mean_ba_benign;
  std::optional<double> mean_ba_watermarked;
  std::optional<double> mean_wsr_watermarked;
  std::optional<double> ba_drop;
  friend bool operator==(const PopulationSummary&, const PopulationSummary&) = default;
};

struct VerificationReport {
  int schema_version = kReportSchemaVersion;
  ExperimentConfig config;
  std::vector<ModelRecord> models;
  PopulationSummary population;
  std::vector<NoiseLevelResult> levels;
  friend bool operator==(const VerificationReport&, const VerificationReport&) = default;
};

/// Trains the benign, watermarked and independent populations, calibrates at
/// every noise level and evaluates each suspicious model. Every stochastic
/// choice derives from config.master_seed; the report does not depend on
/// `workers`.
VerificationReport run_pipeline(const ExperimentConfig& config, std::size_t workers = 1);

/// Writes report.json, trials.csv, aggregates.csv and one region CSV plus
/// JSON sidecar per noise level into `dir`.
void emit_report(const VerificationReport& report, const std::filesystem::path& dir);
VerificationReport read_report(const std::filesystem::path& dir);
std::string report_to_json(const VerificationReport& report);
VerificationReport report_from_json(const std::string& text);

/// Region CSV (`R,W,certified`) and its JSON sidecar.
std::string region_to_csv(const CertifiedRegion& region);
std::string region_sidecar_json(const CertifiedRegion& region, double sigma, double threshold);

/// WSR on the plane x_hat + eps_n * d_n + eps_a * d_a around each triggered
/// test sample, with d_n = sign of one N(0, sigma^2 I) draw shared by all
/// samples and d_a = sign of the input gradient of the loss at the target
/// label. wsr[i * eps_adv.size() + j] is the value at (eps_noise[i], eps_adv[j]).
struct SweepGrid {
  std::vector<double> eps_noise;
  std::vector<double> eps_adv;
  std::vector<double> wsr;

  double at(std::size_t i, std::size_t j) const { return wsr[i * eps_adv.size() + j]; }
};

/// Non-MLP models raise UnsupportedOperationError when any eps_a is nonzero.
SweepGrid perturbation_grid_sweep(const Classifier& model, const TriggerSpec& trigger, const LabeledDataset& test,
                                  const std::vector<double>& eps_noise, const std::vector<double>& eps_adv,
                                  double sigma, const SeededStream& stream);

std::string sweep_to_csv(const SweepGrid& grid);

/// Formats a double with 17 significant digits, as used in every CSV.
std::string format_real(double value);

}  // namespace certdw
