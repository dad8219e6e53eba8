#include "certdw/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "certdw/error.hpp"
#include "certdw/parallel.hpp"
#include "certdw/serialize.hpp"
#include "certdw/stats.hpp"

namespace certdw {
namespace {

using Json = nlohmann::ordered_json;

std::string indexed(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%03zu", prefix, i);
  return buf;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

std::optional<double> rate(std::size_t hits, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(total);
}

void reject_unknown_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw IoError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw IoError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) out = it->get<T>();
}

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["master_seed"] = c.master_seed;
  j["benign_models"] = c.benign_models;
  j["watermarked_models"] = c.watermarked_models;
  j["independent_models"] = c.independent_models;
  j["sigmas"] = c.sigmas;
  j["samples"] = c.samples;
  j["kappa"] = c.kappa;
  j["alpha0"] = c.alpha0;
  j["trigger"] = to_string(c.trigger);
  j["l2_budget"] = c.l2_budget;
  j["patch_size"] = c.patch_size;
  j["blend_alpha"] = c.blend_alpha;
  j["target_label"] = c.target_label;
  j["watermark_rate"] = c.watermark_rate;
  j["samples_per_class"] = c.samples_per_class;
  j["data"] = Json{{"num_classes", c.data.num_classes},
                   {"per_class", c.data.per_class},
                   {"shape", {c.data.shape.channels, c.data.shape.height, c.data.shape.width}},
                   {"noise_std", c.data.noise_std}};
  j["train"] = Json{{"arch", to_string(c.train.arch)},
                    {"hidden", c.train.hidden},
                    {"epochs", c.train.epochs},
                    {"learning_rate", c.train.learning_rate},
                    {"batch_size", c.train.batch_size}};
  j["region"] = Json{{"radius", {c.region_radius.lo, c.region_radius.hi}},
                     {"robustness", {c.region_robustness.lo, c.region_robustness.hi}},
                     {"grid", c.region_grid}};
  return j;
}

ExperimentConfig config_from(const Json& j) {
  reject_unknown_keys(j,
                      {"master_seed", "benign_models", "watermarked_models", "independent_models", "sigmas",
                       "samples", "kappa", "alpha0", "trigger", "l2_budget", "patch_size", "blend_alpha",
                       "target_label", "watermark_rate", "samples_per_class", "data", "train", "region"},
                      "config");
  ExperimentConfig c;
  read_if(j, "master_seed", c.master_seed);
  read_if(j, "benign_models", c.benign_models);
  read_if(j, "watermarked_models", c.watermarked_models);
  read_if(j, "independent_models", c.independent_models);
  read_if(j, "sigmas", c.sigmas);
  read_if(j, "samples", c.samples);
  read_if(j, "kappa", c.kappa);
  read_if(j, "alpha0", c.alpha0);
  if (j.contains("trigger")) c.trigger = trigger_kind_from_string(j["trigger"].get<std::string>());
  read_if(j, "l2_budget", c.l2_budget);
  read_if(j, "patch_size", c.patch_size);
  read_if(j, "blend_alpha", c.blend_alpha);
  read_if(j, "target_label", c.target_label);
  read_if(j, "watermark_rate", c.watermark_rate);
  read_if(j, "samples_per_class", c.samples_per_class);
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown_keys(d, {"num_classes", "per_class", "shape", "noise_std"}, "config.data");
    read_if(d, "num_classes", c.data.num_classes);
    read_if(d, "per_class", c.data.per_class);
    read_if(d, "noise_std", c.data.noise_std);
    if (d.contains("shape")) {
      const auto& s = d["shape"];
      if (!s.is_array() || s.size() != 3) throw IoError("config.data.shape must be [C, H, W]");
      c.data.shape = Shape{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()};
    }
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown_keys(t, {"arch", "hidden", "epochs", "learning_rate", "batch_size"}, "config.train");
    if (t.contains("arch")) c.train.arch = architecture_from_string(t["arch"].get<std::string>());
    read_if(t, "hidden", c.train.hidden);
    read_if(t, "epochs", c.train.epochs);
    read_if(t, "learning_rate", c.train.learning_rate);
    read_if(t, "batch_size", c.train.batch_size);
  }
  if (j.contains("region")) {
    const auto& r = j["region"];
    reject_unknown_keys(r, {"radius", "robustness", "grid"}, "config.region");
    if (r.contains("radius")) c.region_radius = Range{r["radius"].at(0).get<double>(), r["radius"].at(1).get<double>()};
    if (r.contains("robustness")) {
      c.region_robustness = Range{r["robustness"].at(0).get<double>(), r["robustness"].at(1).get<double>()};
    }
    read_if(r, "grid", c.region_grid);
  }
  return c;
}

Json trial_json(const TrialRecord& t) {
  Json j;
  j["model_id"] = t.model_id;
  j["role"] = to_string(t.role);
  j["trigger_id"] = t.trigger_id;
  j["W"] = t.w;
  j["S"] = t.s;
  j["R"] = t.r;
  j["p"] = t.p;
  j["threshold"] = t.threshold;
  j["verified"] = t.verified;
  j["stability_pass"] = t.stability_pass;
  j["tau_certified"] = t.tau_certified;
  j["certified"] = t.certified;
  j["error"] = t.error;
  return j;
}

TrialRecord trial_from(const Json& j) {
  TrialRecord t;
  t.model_id = j.at("model_id").get<std::string>();
  t.role = model_role_from_string(j.at("role").get<std::string>());
  t.trigger_id = j.at("trigger_id").get<std::string>();
  t.w = j.at("W").get<double>();
  t.s = j.at("S").get<double>();
  t.r = j.at("R").get<double>();
  t.p = j.at("p").get<double>();
  t.threshold = j.at("threshold").get<double>();
  t.verified = j.at("verified").get<bool>();
  t.stability_pass = j.at("stability_pass").get<bool>();
  t.tau_certified = j.at("tau_certified").get<bool>();
  t.certified = j.at("certified").get<bool>();
  t.error = j.at("error").get<std::string>();
  return t;
}

Json aggregates_json(const Aggregates& a) {
  Json j;
  j["vsr"] = optional_json(a.vsr);
  j["verification_rate"] = optional_json(a.verification_rate);
  j["tau_certified_rate"] = optional_json(a.tau_certified_rate);
  j["wca"] = optional_json(a.wca);
  j["fpr"] = optional_json(a.fpr);
  j["independent_verification_rate"] = optional_json(a.independent_verification_rate);
  j["watermarked_trials"] = a.watermarked_trials;
  j["independent_trials"] = a.independent_trials;
  j["failed_trials"] = a.failed_trials;
  return j;
}

Aggregates aggregates_from(const Json& j) {
  Aggregates a;
  a.vsr = optional_from(j, "vsr");
  a.verification_rate = optional_from(j, "verification_rate");
  a.tau_certified_rate = optional_from(j, "tau_certified_rate");
  a.wca = optional_from(j, "wca");
  a.fpr = optional_from(j, "fpr");
  a.independent_verification_rate = optional_from(j, "independent_verification_rate");
  a.watermarked_trials = j.at("watermarked_trials").get<std::size_t>();
  a.independent_trials = j.at("independent_trials").get<std::size_t>();
  a.failed_trials = j.at("failed_trials").get<std::size_t>();
  return a;
}

std::string optional_csv(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::uint64_t sigma_key(double sigma) { return std::bit_cast<std::uint64_t>(sigma); }

TriggerSpec make_trigger(const ExperimentConfig& c, const SeededStream& stream) {
  switch (c.trigger) {
    case TriggerKind::kBadNetsPatch:
      return make_badnets_trigger(c.data.shape, c.patch_size, c.target_label, stream);
    case TriggerKind::kBlendedPatch:
      return make_blended_patch_trigger(c.data.shape, c.patch_size, c.blend_alpha, c.target_label, stream);
    case TriggerKind::kBlendedNoise:
      return make_blended_noise_trigger(c.data.shape, c.l2_budget, c.target_label, stream);
  }
  throw DomainError("unknown trigger kind");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (benign_models < 2) throw DomainError("config: need at least two benign models");
  if (sigmas.empty()) throw DomainError("config: need at least one noise level");
  for (double s : sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("config: noise levels must be positive");
  }
  if (samples == 0) throw DomainError("config: samples must be positive");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw DomainError("config: kappa must lie in [0, 1)");
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw DomainError("config: alpha0 must lie in (0, 1)");
  if (!(watermark_rate > 0.0 && watermark_rate <= 1.0)) throw DomainError("config: watermark rate must lie in (0, 1]");
  if (target_label >= data.num_classes) throw DomainError("config: target label out of range");
  if (samples_per_class == 0) throw DomainError("config: samples_per_class must be positive");
  if (region_grid < 2) throw DomainError("config: region grid must be at least 2");
}

std::string config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
  try {
    return config_from(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw IoError(std::string("config: ") + e.what());
  }
}

std::string to_string(ModelRole role) {
  switch (role) {
    case ModelRole::kBenign:
      return "benign";
    case ModelRole::kWatermarked:
      return "watermarked";
    case ModelRole::kIndependent:
      return "independent";
  }
  return "unknown";
}

ModelRole model_role_from_string(const std::string& name) {
  if (name == "benign") return ModelRole::kBenign;
  if (name == "watermarked") return ModelRole::kWatermarked;
  if (name == "independent") return ModelRole::kIndependent;
  throw DomainError("unknown model role '" + name + "'");
}

std::string format_real(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Aggregates compute_aggregates(const std::vector<TrialRecord>& trials, double sigma) {
  Aggregates a;
  std::size_t wm_stable = 0, wm_verified = 0, wm_tau = 0, ind_stable = 0, ind_verified = 0;
  std::vector<RobustnessPoint> points;
  for (const auto& t : trials) {
    if (!t.error.empty()) {
      ++a.failed_trials;
      continue;
    }
    if (t.role == ModelRole::kWatermarked) {
      ++a.watermarked_trials;
      wm_stable += t.stability_pass ? 1 : 0;
      wm_verified += t.verified ? 1 : 0;
      wm_tau += t.tau_certified ? 1 : 0;
      points.push_back({t.r, t.w});
    } else if (t.role == ModelRole::kIndependent) {
      ++a.independent_trials;
      ind_stable += t.stability_pass ? 1 : 0;
      ind_verified += t.verified ? 1 : 0;
    }
  }
  a.vsr = rate(wm_stable, a.watermarked_trials);
  a.verification_rate = rate(wm_verified, a.watermarked_trials);
  a.tau_certified_rate = rate(wm_tau, a.watermarked_trials);
  a.fpr = rate(ind_stable, a.independent_trials);
  a.independent_verification_rate = rate(ind_verified, a.independent_trials);
  if (!points.empty()) {
    const auto it = std::find_if(trials.begin(), trials.end(), [](const TrialRecord& t) {
      return t.error.empty() && t.role == ModelRole::kWatermarked;
    });
    a.wca = wca(points, sigma, it->threshold);
  }
  return a;
}

VerificationReport run_pipeline(const ExperimentConfig& config, std::size_t workers) {
  config.validate();
  const SeededStream root(config.master_seed);
  spdlog::info("pipeline: seed={} J={} watermarked={} independent={} sigmas={} M={}", config.master_seed,
               config.benign_models, config.watermarked_models, config.independent_models, config.sigmas.size(),
               config.samples);

  const auto [train, test] = gen_toy_dataset(config.data, root.derive(StreamTag::kData));

  struct ModelTask {
    ModelRecord record;
    std::optional<TriggerSpec> trigger;  // watermark embedded (watermarked) or probed (independent)
    std::optional<Classifier> model;
    std::string error;
  };
  std::vector<ModelTask> tasks;
  for (std::size_t i = 0; i < config.benign_models; ++i) {
    tasks.push_back({{indexed("benign", i), ModelRole::kBenign, "", 0.0, std::nullopt}, std::nullopt, std::nullopt, ""});
  }
  for (std::size_t i = 0; i < config.watermarked_models; ++i) {
    tasks.push_back({{indexed("watermarked", i), ModelRole::kWatermarked, indexed("trigger-wm", i), 0.0, std::nullopt},
                     make_trigger(config, root.derive(StreamTag::kTrigger, {0, i})), std::nullopt, ""});
  }
  for (std::size_t i = 0; i < config.independent_models; ++i) {
    tasks.push_back({{indexed("independent", i), ModelRole::kIndependent, indexed("trigger-ind", i), 0.0, std::nullopt},
                     make_trigger(config, root.derive(StreamTag::kTrigger, {1, i})), std::nullopt, ""});
  }

  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    auto& task = tasks[t];
    const auto key = fnv1a64(task.record.id);
    try {
      if (task.record.role == ModelRole::kWatermarked) {
        const auto poisoned =
            poison_dataset(train, *task.trigger, config.watermark_rate, root.derive(StreamTag::kPoison, {key}));
        task.model = train_model(poisoned.data, config.train, root.derive(StreamTag::kTrain, {key}));
      } else {
        task.model = train_model(train, config.train, root.derive(StreamTag::kTrain, {key}));
      }
      task.record.ba = evaluate_ba(*task.model, test);
      if (task.trigger) task.record.wsr = evaluate_wsr(*task.model, test, *task.trigger);
    } catch (const Error& e) {
      task.error = e.what();
    }
  });

  VerificationReport report;
  report.config = config;
  std::vector<Classifier> benign;
  std::vector<std::string> benign_ids;
  std::vector<double> ba_benign, ba_wm, wsr_wm;
  for (const auto& task : tasks) {
    report.models.push_back(task.record);
    if (!task.error.empty()) {
      spdlog::warn("pipeline: model {} failed to train: {}", task.record.id, task.error);
      continue;
    }
    if (task.record.role == ModelRole::kBenign) {
      benign.push_back(*task.model);
      benign_ids.push_back(task.record.id);
      ba_benign.push_back(task.record.ba);
    } else if (task.record.role == ModelRole::kWatermarked) {
      ba_wm.push_back(task.record.ba);
      wsr_wm.push_back(*task.record.wsr);
    }
  }
  report.population.mean_ba_benign = mean_of(ba_benign);
  report.population.mean_ba_watermarked = mean_of(ba_wm);
  report.population.mean_wsr_watermarked = mean_of(wsr_wm);
  if (report.population.mean_ba_benign && report.population.mean_ba_watermarked) {
    report.population.ba_drop = *report.population.mean_ba_benign - *report.population.mean_ba_watermarked;
  }

  std::vector<std::size_t> suspicious;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].record.role != ModelRole::kBenign) suspicious.push_back(t);
  }

  for (double sigma : config.sigmas) {
    NoiseLevelResult level;
    level.sigma = sigma;
    const NoiseSpec noise = NoiseSpec::gaussian(sigma);
    const CalibrationBuild build{noise, config.samples, config.kappa, config.samples_per_class, workers};
    const auto calib =
        build_calibration_set(benign, benign_ids, test, build, root.derive(StreamTag::kNoise, {0, sigma_key(sigma)}));
    level.calibration_values = calib.pp_values;
    level.calibration_ids = calib.model_ids;
    level.filtered = calib.filtered;
    level.threshold_index = threshold_index(calib.size(), calib.filtered, config.alpha0);
    level.threshold = calibration_threshold(calib, config.alpha0);
    level.region_area = gaussian_certified_region(sigma, level.threshold, config.region_radius,
                                                  config.region_robustness, config.region_grid)
                            .area;

    level.trials.resize(suspicious.size());
    parallel_for(suspicious.size(), workers, [&](std::size_t n) {
      const auto& task = tasks[suspicious[n]];
      TrialRecord& trial = level.trials[n];
      trial.model_id = task.record.id;
      trial.role = task.record.role;
      trial.trigger_id = task.record.trigger_id;
      trial.threshold = level.threshold;
      if (!task.error.empty()) {
        trial.error = "training failed: " + task.error;
        return;
      }
      const auto key = fnv1a64(task.record.id);
      try {
        const auto reps = select_class_representatives(*task.model, test,
                                                       root.derive(StreamTag::kRepresentatives, {key}),
                                                       config.samples_per_class, task.record.id);
        const auto noise_stream = root.derive(StreamTag::kNoise, {1, sigma_key(sigma), key});
        const SmoothingRun w_run{noise, config.samples, noise_stream.substream(0), 1};
        const SmoothingRun s_run{noise, config.samples, noise_stream.substream(1), 1};
        trial.w = watermark_robustness(*task.model, reps, *task.trigger, w_run);
        trial.s = stability(*task.model, reps, task.trigger->target_label, s_run);
        trial.r = trigger_radius(*task.trigger, reps.samples, true);
        const auto decision = verify(calib, trial.w, config.alpha0);
        trial.p = decision.p_value;
        trial.verified = decision.trained_on_protected;
        trial.stability_pass = trial.s > level.threshold;
        trial.tau_certified = tau_certified(trial.w, trial.s, level.threshold);
        trial.certified = gaussian_condition(trial.w, trial.r, sigma, level.threshold);
      } catch (const Error& e) {
        trial.error = e.what();
      }
    });
    std::sort(level.trials.begin(), level.trials.end(),
              [](const TrialRecord& a, const TrialRecord& b) { return a.model_id < b.model_id; });
    level.aggregates = compute_aggregates(level.trials, sigma);
    report.levels.push_back(std::move(level));
  }
  return report;
}

std::string report_to_json(const VerificationReport& report) {
  Json j;
  j["schema_version"] = report.schema_version;
  j["config"] = config_json(report.config);
  Json models = Json::array();
  for (const auto& m : report.models) {
    models.push_back(Json{{"id", m.id},
                          {"role", to_string(m.role)},
                          {"trigger_id", m.trigger_id},
                          {"ba", m.ba},
                          {"wsr", optional_json(m.wsr)}});
  }
  j["models"] = std::move(models);
  j["population"] = Json{{"mean_ba_benign", optional_json(report.population.mean_ba_benign)},
                         {"mean_ba_watermarked", optional_json(report.population.mean_ba_watermarked)},
                         {"mean_wsr_watermarked", optional_json(report.population.mean_wsr_watermarked)},
                         {"ba_drop", optional_json(report.population.ba_drop)}};
  Json levels = Json::array();
  for (const auto& l : report.levels) {
    Json lj;
    lj["sigma"] = l.sigma;
    lj["calibration"] = Json{{"pp_values", l.calibration_values},
                             {"model_ids", l.calibration_ids},
                             {"m", l.filtered},
                             {"threshold_index", l.threshold_index},
                             {"threshold", l.threshold}};
    lj["region_area"] = l.region_area;
    lj["aggregates"] = aggregates_json(l.aggregates);
    Json trials = Json::array();
    for (const auto& t : l.trials) trials.push_back(trial_json(t));
    lj["trials"] = std::move(trials);
    levels.push_back(std::move(lj));
  }
  j["levels"] = std::move(levels);
  return j.dump(2) + "\n";
}

VerificationReport report_from_json(const std::string& text) {
  try {
    const auto j = Json::parse(text);
    VerificationReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw IoError("report: unsupported schema version " + std::to_string(r.schema_version));
    }
    r.config = config_from(j.at("config"));
    for (const auto& m : j.at("models")) {
      ModelRecord rec;
      rec.id = m.at("id").get<std::string>();
      rec.role = model_role_from_string(m.at("role").get<std::string>());
      rec.trigger_id = m.at("trigger_id").get<std::string>();
      rec.ba = m.at("ba").get<double>();
      rec.wsr = optional_from(m, "wsr");
      r.models.push_back(std::move(rec));
    }
    const auto& p = j.at("population");
    r.population.mean_ba_benign = optional_from(p, "mean_ba_benign");
    r.population.mean_ba_watermarked = optional_from(p, "mean_ba_watermarked");
    r.population.mean_wsr_watermarked = optional_from(p, "mean_wsr_watermarked");
    r.population.ba_drop = optional_from(p, "ba_drop");
    for (const auto& lj : j.at("levels")) {
      NoiseLevelResult l;
      l.sigma = lj.at("sigma").get<double>();
      const auto& c = lj.at("calibration");
      l.calibration_values = c.at("pp_values").get<std::vector<double>>();
      l.calibration_ids = c.at("model_ids").get<std::vector<std::string>>();
      l.filtered = c.at("m").get<std::size_t>();
      l.threshold_index = c.at("threshold_index").get<std::size_t>();
      l.threshold = c.at("threshold").get<double>();
      l.region_area = lj.at("region_area").get<double>();
      l.aggregates = aggregates_from(lj.at("aggregates"));
      for (const auto& t : lj.at("trials")) l.trials.push_back(trial_from(t));
      r.levels.push_back(std::move(l));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("report: ") + e.what());
  } catch (const DomainError& e) {
    throw IoError(std::string("report: ") + e.what());
  }
}

std::string region_to_csv(const CertifiedRegion& region) {
  std::string out = "R,W,certified\n";
  for (const auto& p : region.points) {
    out += format_real(p.radius) + "," + format_real(p.robustness) + "," + (p.certified ? "1" : "0") + "\n";
  }
  return out;
}

std::string region_sidecar_json(const CertifiedRegion& region, double sigma, double threshold) {
  Json j;
  j["sigma"] = sigma;
  j["threshold"] = threshold;
  j["ranges"] = Json{{"R", {region.radius_range.lo, region.radius_range.hi}},
                     {"W", {region.robustness_range.lo, region.robustness_range.hi}}};
  j["grid_n"] = region.grid_n;
  j["area"] = region.area;
  j["area_normalization"] = "fraction of grid points inside the region over the unit-normalized rectangle";
  return j.dump(2) + "\n";
}

void emit_report(const VerificationReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "report.json", report_to_json(report));

  std::string trials = "sigma,model_id,role,trigger_id,W,S,R,p,threshold,verified,stability_pass,tau_certified,certified,error\n";
  std::string aggregates =
      "sigma,threshold,vsr,verification_rate,tau_certified_rate,wca,fpr,independent_verification_rate,"
      "watermarked_trials,independent_trials,failed_trials\n";
  for (std::size_t i = 0; i < report.levels.size(); ++i) {
    const auto& l = report.levels[i];
    for (const auto& t : l.trials) {
      std::string error = t.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      trials += format_real(l.sigma) + "," + t.model_id + "," + to_string(t.role) + "," + t.trigger_id + "," +
                format_real(t.w) + "," + format_real(t.s) + "," + format_real(t.r) + "," + format_real(t.p) + "," +
                format_real(t.threshold) + "," + (t.verified ? "1" : "0") + "," + (t.stability_pass ? "1" : "0") +
                "," + (t.tau_certified ? "1" : "0") + "," + (t.certified ? "1" : "0") + "," + error + "\n";
    }
    const auto& a = l.aggregates;
    aggregates += format_real(l.sigma) + "," + format_real(l.threshold) + "," + optional_csv(a.vsr) + "," +
                  optional_csv(a.verification_rate) + "," + optional_csv(a.tau_certified_rate) + "," +
                  optional_csv(a.wca) + "," + optional_csv(a.fpr) + "," +
                  optional_csv(a.independent_verification_rate) + "," + std::to_string(a.watermarked_trials) + "," +
                  std::to_string(a.independent_trials) + "," + std::to_string(a.failed_trials) + "\n";

    const auto region = gaussian_certified_region(l.sigma, l.threshold, report.config.region_radius,
                                                  report.config.region_robustness, report.config.region_grid);
    const auto stem = "region_" + std::to_string(i);
    write_text_file(dir / (stem + ".csv"), region_to_csv(region));
    write_text_file(dir / (stem + ".json"), region_sidecar_json(region, l.sigma, l.threshold));
  }
  write_text_file(dir / "trials.csv", trials);
  write_text_file(dir / "aggregates.csv", aggregates);
}

VerificationReport read_report(const std::filesystem::path& dir) {
  return report_from_json(read_text_file(dir / "report.json"));
}

SweepGrid perturbation_grid_sweep(const Classifier& model, const TriggerSpec& trigger, const LabeledDataset& test,
                                  const std::vector<double>& eps_noise, const std::vector<double>& eps_adv,
                                  double sigma, const SeededStream& stream) {
  if (test.empty()) throw DomainError("perturbation_grid_sweep: empty test set");
  if (eps_noise.empty() || eps_adv.empty()) throw DomainError("perturbation_grid_sweep: empty grid");
  if (!(sigma > 0.0)) throw DomainError("perturbation_grid_sweep: sigma must be positive");
  const bool needs_gradient = std::any_of(eps_adv.begin(), eps_adv.end(), [](double e) { return e != 0.0; });
  if (needs_gradient && model.kind() != ClassifierKind::kMlp) {
    throw UnsupportedOperationError("perturbation_grid_sweep: adversarial direction needs an mlp model, got " +
                                    to_string(model.kind()));
  }
  const auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };

  const auto draw = sample_noise(NoiseSpec::gaussian(sigma), trigger.shape, stream);
  std::vector<double> d_noise(draw.values.size());
  std::transform(draw.values.begin(), draw.values.end(), d_noise.begin(), sign);

  std::vector<ImageTensor> triggered;
  std::vector<std::vector<double>> d_adv;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] == trigger.target_label) continue;
    triggered.push_back(apply_trigger(test.images[i], trigger, true));
    if (needs_gradient) {
      const auto grad = model.input_gradient(triggered.back(), trigger.target_label);
      std::vector<double> dir(grad.values.size());
      std::transform(grad.values.begin(), grad.values.end(), dir.begin(), sign);
      d_adv.push_back(std::move(dir));
    }
  }
  if (triggered.empty()) throw DomainError("perturbation_grid_sweep: every test sample carries the target label");

  SweepGrid grid{eps_noise, eps_adv, std::vector<double>(eps_noise.size() * eps_adv.size(), 0.0)};
  std::vector<double> probe(trigger.shape.size());
  for (std::size_t a = 0; a < eps_noise.size(); ++a) {
    for (std::size_t b = 0; b < eps_adv.size(); ++b) {
      std::size_t hits = 0;
      for (std::size_t n = 0; n < triggered.size(); ++n) {
        const auto& x = triggered[n].values;
        for (std::size_t i = 0; i < probe.size(); ++i) {
          probe[i] = x[i] + eps_noise[a] * d_noise[i];
          if (needs_gradient) probe[i] += eps_adv[b] * d_adv[n][i];
        }
        if (model.predict_flat(probe) == trigger.target_label) ++hits;
      }
      grid.wsr[a * eps_adv.size() + b] = static_cast<double>(hits) / static_cast<double>(triggered.size());
    }
  }
  return grid;
}

std::string sweep_to_csv(const SweepGrid& grid) {
  std::string out = "eps_n,eps_a,wsr\n";
  for (std::size_t a = 0; a < grid.eps_noise.size(); ++a) {
    for (std::size_t b = 0; b < grid.eps_adv.size(); ++b) {
      out += format_real(grid.eps_noise[a]) + "," + format_real(grid.eps_adv[b]) + "," + format_real(grid.at(a, b)) +
             "\n";
    }
  }
  return out;
}

}  // namespace certdw
