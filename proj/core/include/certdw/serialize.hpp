#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "certdw/classifier.hpp"
#include "certdw/conformal.hpp"
#include "certdw/smoothing.hpp"
#include "certdw/watermark.hpp"

namespace certdw {

// Model, trigger and calibration documents. Reals are written in the
// shortest form that parses back to the identical double, so every document
// round-trips bit-exactly. Malformed documents raise IoError.

/// {kind, num_classes, input_shape, parameters: [{name, shape, data}]}
std::string classifier_to_json(const Classifier& model);
Classifier classifier_from_json(const std::string& text);
void save_classifier(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

/// {kind, target_label, blend_alpha, l2_budget, patch_origin, patch_size,
///  shape, mask, pattern}
std::string trigger_to_json(const TriggerSpec& trigger);
TriggerSpec trigger_from_json(const std::string& text);
void save_trigger(const TriggerSpec& trigger, const std::filesystem::path& path);
TriggerSpec load_trigger(const std::filesystem::path& path);

struct CalibrationFile {
  CalibrationSet set;
  NoiseSpec noise;
  std::uint64_t samples = 1024;
  std::uint64_t master_seed = 0;
};

/// {pp_values, kappa, m, noise_spec, M, model_ids, master_seed}
std::string calibration_to_json(const CalibrationFile& calib);
CalibrationFile calibration_from_json(const std::string& text);
void save_calibration(const CalibrationFile& calib, const std::filesystem::path& path);
CalibrationFile load_calibration(const std::filesystem::path& path);

std::string noise_spec_to_json(const NoiseSpec& spec);
NoiseSpec noise_spec_from_json(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace certdw
