// certdw command-line front end.
//
// Exit codes: 0 success (verify/certify: positive decision), 3 negative
// decision, 64 usage error, 65 invalid data, 70 internal failure, 74 I/O.

#include <glob.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "certdw/certify.hpp"
#include "certdw/conformal.hpp"
#include "certdw/dataset.hpp"
#include "certdw/error.hpp"
#include "certdw/harness.hpp"
#include "certdw/parallel.hpp"
#include "certdw/serialize.hpp"
#include "certdw/stats.hpp"
#include "certdw/train.hpp"
#include "certdw/watermark.hpp"

namespace fs = std::filesystem;
using certdw::SeededStream;
using certdw::StreamTag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNegative = 3;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitInternal = 70;
constexpr int kExitIo = 74;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Flag plumbing

// Fills options not given on the command line from a flat JSON object keyed
// by long flag names.
void merge_config_file(CLI::App& cmd, const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(certdw::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw certdw::IoError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config " + path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = cmd.get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      throw UsageError("config " + path + ": unknown key '" + key + "' for " + cmd.get_name());
    }
    if (opt->count() > 0) continue;
    const auto as_text = [](const nlohmann::json& v) {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
      return v.dump();
    };
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(as_text(item));
    } else {
      opt->add_result(as_text(value));
    }
    opt->run_callback();
  }
}

void require_flags(const CLI::App& cmd, std::initializer_list<const char*> names) {
  for (const char* name : names) {
    if (cmd.get_option(name)->count() == 0) throw UsageError(std::string(name) + " is required");
  }
}

void log_resolved(const CLI::App& cmd) {
  std::string line;
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    line += " " + opt->get_name() + "=" + value;
  }
  spdlog::info("{}:{}", cmd.get_name(), line);
}

// A dataset directory written by gen-data has train/ and test/ splits; a
// directory with its own meta.json is used as-is.
certdw::LabeledDataset load_split(const fs::path& dir, const char* split) {
  if (fs::exists(dir / "meta.json")) return certdw::load_dataset(dir);
  return certdw::load_dataset(dir / split);
}

std::uint64_t sigma_key(double sigma) { return std::bit_cast<std::uint64_t>(sigma); }

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> paths;
  for (const auto& pattern : patterns) {
    if (pattern.find_first_of("*?[") == std::string::npos) {
      paths.push_back(pattern);
      continue;
    }
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    ::globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw certdw::IoError("cannot expand '" + pattern + "'");
  }
  std::sort(paths.begin(), paths.end());
  paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
  return paths;
}

std::string model_id(const fs::path& path) { return path.stem().string(); }

certdw::Range parse_range(const std::vector<double>& v, const char* flag) {
  if (v.size() != 2 || !(v[0] < v[1])) throw UsageError(std::string(flag) + " expects LO,HI with LO < HI");
  return certdw::Range{v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Subcommand state

struct GenDataArgs {
  std::string out;
  std::size_t classes = 4;
  std::size_t per_class = 100;
  std::vector<std::size_t> shape{3, 8, 8};
  double noise_std = 0.1;
  std::uint64_t seed = 0;
};

struct WatermarkArgs {
  std::string data;
  std::string out;
  std::string trigger = "badnets";
  certdw::Label target = 1;
  double rate = 0.1;
  double l2 = 0.6;
  std::size_t patch_size = certdw::kDefaultPatchSize;
  double blend_alpha = certdw::kDefaultBlendAlpha;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data;
  std::string out;
  std::string arch = "mlp";
  std::size_t epochs = 100;
  std::size_t hidden = 32;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
};

struct CalibrateArgs {
  std::vector<std::string> models;
  std::string data;
  std::string out;
  double sigma = 0.5;
  std::uint64_t samples = 1024;
  double kappa = 0.2;
  std::size_t per_class = 1;
  std::uint64_t seed = 0;
};

struct SuspectArgs {
  std::string model;
  std::string reps_model;
  std::string trigger;
  std::string calib;
  std::string data;
  double sigma = 0.0;  // 0 = take from the calibration file
  std::uint64_t samples = 0;
  double alpha0 = 0.05;
  std::size_t per_class = 1;
  std::uint64_t seed = 0;
};

struct CertifyArgs {
  SuspectArgs suspect;
  std::string dist = "gaussian";
  double low = -0.5;
  double high = 0.5;
  std::string region_out;
  std::vector<double> region_radius{0.0, 2.0};
  std::vector<double> region_robustness{0.0, 1.0};
  std::size_t grid = 50;
};

struct SweepArgs {
  std::string model;
  std::string trigger;
  std::string data;
  std::string out;
  std::vector<double> eps_n{0.0};
  std::vector<double> eps_a{0.0};
  double sigma = 0.5;
  std::uint64_t seed = 0;
};

struct RunArgs {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<double> sigmas;
};

// ---------------------------------------------------------------------------
// Subcommand bodies

int cmd_gen_data(const GenDataArgs& a) {
  if (a.shape.size() != 3) throw UsageError("--shape expects C,H,W");
  certdw::ToyDataConfig config;
  config.num_classes = a.classes;
  config.per_class = a.per_class;
  config.shape = certdw::Shape{a.shape[0], a.shape[1], a.shape[2]};
  config.noise_std = a.noise_std;
  const auto [train, test] = certdw::gen_toy_dataset(config, SeededStream(a.seed).derive(StreamTag::kData));
  certdw::save_dataset(train, fs::path(a.out) / "train");
  certdw::save_dataset(test, fs::path(a.out) / "test");
  spdlog::info("gen-data: wrote {} train and {} test samples to {}", train.size(), test.size(), a.out);
  return kExitOk;
}

int cmd_watermark(const WatermarkArgs& a) {
  const auto train = load_split(a.data, "train");
  const SeededStream root(a.seed);
  const auto kind = certdw::trigger_kind_from_string(a.trigger);
  certdw::TriggerSpec trigger;
  switch (kind) {
    case certdw::TriggerKind::kBadNetsPatch:
      trigger = certdw::make_badnets_trigger(train.shape, a.patch_size, a.target,
                                             root.derive(StreamTag::kTrigger, {0, 0}));
      break;
    case certdw::TriggerKind::kBlendedPatch:
      trigger = certdw::make_blended_patch_trigger(train.shape, a.patch_size, a.blend_alpha, a.target,
                                                   root.derive(StreamTag::kTrigger, {0, 0}));
      break;
    case certdw::TriggerKind::kBlendedNoise:
      trigger = certdw::make_blended_noise_trigger(train.shape, a.l2, a.target,
                                                   root.derive(StreamTag::kTrigger, {0, 0}));
      break;
  }
  const auto poisoned = certdw::poison_dataset(train, trigger, a.rate, root.derive(StreamTag::kPoison, {0}));
  const fs::path out(a.out);
  certdw::save_dataset(poisoned.data, out / "train");
  if (!fs::exists(fs::path(a.data) / "meta.json") && fs::exists(fs::path(a.data) / "test")) {
    certdw::save_dataset(certdw::load_dataset(fs::path(a.data) / "test"), out / "test");
  }
  certdw::save_trigger(trigger, out / "trigger.json");
  spdlog::info("watermark: poisoned {} of {} samples with a {} trigger, target {}", poisoned.poisoned_indices.size(),
               train.size(), a.trigger, a.target);
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  const auto train = load_split(a.data, "train");
  certdw::TrainConfig config;
  config.arch = certdw::architecture_from_string(a.arch);
  config.epochs = a.epochs;
  config.hidden = a.hidden;
  config.learning_rate = a.lr;
  config.batch_size = a.batch;
  const auto model = certdw::train_model(train, config, SeededStream(a.seed).derive(StreamTag::kTrain));
  certdw::save_classifier(model, a.out);
  const fs::path test_dir = fs::path(a.data) / "test";
  if (fs::exists(test_dir / "meta.json")) {
    spdlog::info("train: test accuracy {:.4f}", certdw::evaluate_ba(model, certdw::load_dataset(test_dir)));
  }
  spdlog::info("train: wrote {}", a.out);
  return kExitOk;
}

int cmd_calibrate(const CalibrateArgs& a) {
  const auto paths = expand_globs(a.models);
  if (paths.empty()) throw UsageError("--models matched no files");
  const auto pool = load_split(a.data, "test");
  std::vector<certdw::Classifier> models;
  std::vector<std::string> ids;
  for (const auto& p : paths) {
    models.push_back(certdw::load_classifier(p));
    ids.push_back(model_id(p));
  }
  const auto noise = certdw::NoiseSpec::gaussian(a.sigma);
  const certdw::CalibrationBuild build{noise, a.samples, a.kappa, a.per_class, certdw::default_worker_count()};
  certdw::CalibrationFile file;
  file.set = certdw::build_calibration_set(models, ids, pool, build,
                                           SeededStream(a.seed).derive(StreamTag::kNoise, {0, sigma_key(a.sigma)}));
  file.noise = noise;
  file.samples = a.samples;
  file.master_seed = a.seed;
  certdw::save_calibration(file, a.out);
  spdlog::info("calibrate: {} models, {} filtered, wrote {}", file.set.size(), file.set.filtered, a.out);
  return kExitOk;
}

struct SuspectContext {
  certdw::Classifier model;
  certdw::TriggerSpec trigger;
  certdw::CalibrationFile calib;
  certdw::ClassRepresentatives reps;
  std::string id;
  SeededStream noise_stream{0};
};

SuspectContext load_suspect(const SuspectArgs& a) {
  const auto model = certdw::load_classifier(a.model);
  const auto trigger = certdw::load_trigger(a.trigger);
  const auto calib = certdw::load_calibration(a.calib);
  const auto pool = load_split(a.data, "test");
  const std::string id = model_id(a.model);
  const SeededStream root(a.seed);
  const auto key = certdw::fnv1a64(id);
  const auto certifier = a.reps_model.empty() ? model : certdw::load_classifier(a.reps_model);
  const std::string source = a.reps_model.empty() ? id : model_id(a.reps_model);
  auto reps = certdw::select_class_representatives(certifier, pool, root.derive(StreamTag::kRepresentatives, {key}),
                                                   a.per_class, source);
  const double sigma = a.sigma > 0.0 ? a.sigma : calib.noise.sigma;
  return SuspectContext{model, trigger, calib, std::move(reps), id,
                        root.derive(StreamTag::kNoise, {1, sigma_key(sigma), key})};
}

certdw::NoiseSpec resolve_gaussian(const SuspectArgs& a, const certdw::CalibrationFile& calib) {
  if (a.sigma > 0.0) {
    if (calib.noise.family == certdw::NoiseFamily::kGaussian && a.sigma != calib.noise.sigma) {
      spdlog::warn("sigma {} differs from the calibration's {}", a.sigma, calib.noise.sigma);
    }
    return certdw::NoiseSpec::gaussian(a.sigma);
  }
  if (calib.noise.family != certdw::NoiseFamily::kGaussian) throw UsageError("--sigma is required");
  return certdw::NoiseSpec::gaussian(calib.noise.sigma);
}

int cmd_verify(const SuspectArgs& a) {
  auto ctx = load_suspect(a);
  const auto noise = resolve_gaussian(a, ctx.calib);
  const std::uint64_t samples = a.samples > 0 ? a.samples : ctx.calib.samples;
  const double w = certdw::watermark_robustness(ctx.model, ctx.reps, ctx.trigger,
                                                {noise, samples, ctx.noise_stream.substream(0), 1});
  const double s = certdw::stability(ctx.model, ctx.reps, ctx.trigger.target_label,
                                     {noise, samples, ctx.noise_stream.substream(1), 1});
  const auto decision = certdw::verify(ctx.calib.set, w, a.alpha0);

  nlohmann::ordered_json out;
  out["W"] = w;
  out["S"] = s;
  out["p"] = decision.p_value;
  out["threshold"] = decision.threshold;
  out["verified"] = decision.trained_on_protected;
  std::cout << out.dump() << "\n";
  spdlog::info("verify: {} W={:.4f} S={:.4f} p={:.4f} threshold={:.4f} -> {}", ctx.id, w, s, decision.p_value,
               decision.threshold, decision.trained_on_protected ? "trained on the protected dataset" : "not verified");
  return decision.trained_on_protected ? kExitOk : kExitNegative;
}

int cmd_certify(const CertifyArgs& a) {
  auto ctx = load_suspect(a.suspect);
  const bool gaussian = a.dist == "gaussian";
  if (!gaussian && a.dist != "uniform") throw UsageError("--dist must be gaussian or uniform");
  const auto noise = gaussian ? resolve_gaussian(a.suspect, ctx.calib) : certdw::NoiseSpec::uniform(a.low, a.high);
  const std::uint64_t samples = a.suspect.samples > 0 ? a.suspect.samples : ctx.calib.samples;
  const double threshold = certdw::calibration_threshold(ctx.calib.set, a.suspect.alpha0);
  const double w = certdw::watermark_robustness(ctx.model, ctx.reps, ctx.trigger,
                                                {noise, samples, ctx.noise_stream.substream(0), 1});
  const double s = certdw::stability(ctx.model, ctx.reps, ctx.trigger.target_label,
                                     {noise, samples, ctx.noise_stream.substream(1), 1});
  const auto norms = certdw::trigger_residual_norms(ctx.trigger, ctx.reps.samples, true);
  const double r = *std::max_element(norms.begin(), norms.end());
  const std::size_t k = ctx.model.num_classes();

  nlohmann::ordered_json out;
  out["dist"] = a.dist;
  out["noise"] = nlohmann::ordered_json::parse(certdw::noise_spec_to_json(noise));
  out["W"] = w;
  out["S"] = s;
  out["R"] = r;
  out["residual_norms"] = norms;
  out["threshold"] = threshold;
  bool certified = false;
  double beta2 = 0.0;
  certdw::CertifiedRegion region;
  const auto radius_range = parse_range(a.region_radius, "--region-radius");
  const auto robustness_range = parse_range(a.region_robustness, "--region-robustness");
  if (gaussian) {
    certified = certdw::gaussian_condition(w, r, noise.sigma, threshold);
    beta2 = certdw::beta2_star_gaussian(w, norms, noise.sigma);
    const auto radius = certdw::gaussian_certified_radius(w, noise.sigma, threshold);
    nlohmann::ordered_json rj;
    switch (radius.status) {
      case certdw::CertifiedRadius::Status::kNone:
        rj["status"] = "none";
        break;
      case certdw::CertifiedRadius::Status::kFinite:
        rj["status"] = "finite";
        rj["value"] = radius.radius;
        break;
      case certdw::CertifiedRadius::Status::kUnbounded:
        rj["status"] = "unbounded";
        break;
    }
    out["certified_radius"] = rj;
    region = certdw::gaussian_certified_region(noise.sigma, threshold, radius_range, robustness_range, a.grid);
  } else {
    certified = certdw::uniform_condition(w, r, a.low, a.high, k, threshold);
    beta2 = certdw::beta2_star_uniform(w, norms, a.low, a.high);
    region = certdw::uniform_certified_region(a.low, a.high, k, threshold, radius_range, robustness_range, a.grid);
  }
  out["beta2_star"] = beta2;
  out["generic_condition"] = certdw::generic_condition(beta2, threshold);
  out["tau_certified"] = certdw::tau_certified(w, s, threshold);
  out["certified"] = certified;
  out["region_area"] = region.area;
  if (!a.region_out.empty()) {
    const fs::path csv(a.region_out);
    certdw::write_text_file(csv, certdw::region_to_csv(region));
    fs::path sidecar = csv;
    sidecar.replace_extension(".json");
    certdw::write_text_file(sidecar, certdw::region_sidecar_json(region, gaussian ? noise.sigma : 0.0, threshold));
  }
  std::cout << out.dump() << "\n";
  spdlog::info("certify: {} W={:.4f} R={:.4f} threshold={:.4f} -> {}", ctx.id, w, r, threshold,
               certified ? "certified" : "not certified");
  return certified ? kExitOk : kExitNegative;
}

int cmd_sweep(const SweepArgs& a) {
  const auto model = certdw::load_classifier(a.model);
  const auto trigger = certdw::load_trigger(a.trigger);
  const auto test = load_split(a.data, "test");
  const auto grid = certdw::perturbation_grid_sweep(model, trigger, test, a.eps_n, a.eps_a, a.sigma,
                                                    SeededStream(a.seed).derive(StreamTag::kSweep));
  certdw::write_text_file(a.out, certdw::sweep_to_csv(grid));
  spdlog::info("sweep: {}x{} grid, base WSR {:.4f}, wrote {}", a.eps_n.size(), a.eps_a.size(), grid.at(0, 0), a.out);
  return kExitOk;
}

int cmd_run(const std::string& config_path, const RunArgs& a) {
  certdw::ExperimentConfig config;
  if (!config_path.empty()) config = certdw::config_from_json(certdw::read_text_file(config_path));
  if (a.seed) config.master_seed = *a.seed;
  if (!a.sigmas.empty()) config.sigmas = a.sigmas;
  config.validate();
  spdlog::info("run: master seed {}", config.master_seed);
  spdlog::info("run: resolved config {}", nlohmann::json::parse(certdw::config_to_json(config)).dump());
  const auto report = certdw::run_pipeline(config, certdw::default_worker_count());
  certdw::emit_report(report, a.out);
  for (const auto& level : report.levels) {
    const auto& ag = level.aggregates;
    spdlog::info("run: sigma={} threshold={:.4f} verification_rate={} fpr={} wca={}", level.sigma, level.threshold,
                 ag.verification_rate ? certdw::format_real(*ag.verification_rate) : "n/a",
                 ag.fpr ? certdw::format_real(*ag.fpr) : "n/a", ag.wca ? certdw::format_real(*ag.wca) : "n/a");
  }
  spdlog::info("run: wrote {}", a.out);
  return kExitOk;
}

void add_suspect_flags(CLI::App* cmd, SuspectArgs& a) {
  cmd->add_option("--model", a.model, "suspicious model file");
  cmd->add_option("--reps-model", a.reps_model, "model certifying representative correctness (default: --model)");
  cmd->add_option("--trigger", a.trigger, "trigger file");
  cmd->add_option("--calib", a.calib, "calibration file");
  cmd->add_option("--data", a.data, "dataset directory holding the representative pool");
  cmd->add_option("--sigma", a.sigma, "Gaussian noise level (default: from the calibration file)");
  cmd->add_option("--samples", a.samples, "Monte Carlo samples (default: from the calibration file)");
  cmd->add_option("--alpha0", a.alpha0, "significance level");
  cmd->add_option("--per-class", a.per_class, "representatives per class");
  cmd->add_option("--seed", a.seed, "master seed");
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Certified dataset ownership verification"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string config_path;
  GenDataArgs gen;
  WatermarkArgs wm;
  TrainArgs tr;
  CalibrateArgs cal;
  SuspectArgs ver;
  CertifyArgs cert;
  SweepArgs sw;
  RunArgs run;

  auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  c_gen->add_option("--out", gen.out, "output directory");
  c_gen->add_option("--classes", gen.classes, "number of classes");
  c_gen->add_option("--per-class", gen.per_class, "samples per class");
  c_gen->add_option("--shape", gen.shape, "C,H,W")->delimiter(',');
  c_gen->add_option("--noise-std", gen.noise_std, "pixel noise standard deviation");
  c_gen->add_option("--seed", gen.seed, "master seed");

  auto* c_wm = app.add_subcommand("watermark", "poison a dataset with a trigger");
  c_wm->add_option("--data", wm.data, "dataset directory");
  c_wm->add_option("--out", wm.out, "output directory");
  c_wm->add_option("--trigger", wm.trigger, "badnets | blended-patch | blended-noise");
  c_wm->add_option("--target", wm.target, "target label");
  c_wm->add_option("--rate", wm.rate, "poisoning rate");
  c_wm->add_option("--l2", wm.l2, "l2 budget of the blended-noise trigger");
  c_wm->add_option("--patch-size", wm.patch_size, "patch side length");
  c_wm->add_option("--blend-alpha", wm.blend_alpha, "blend weight of the blended-patch trigger");
  c_wm->add_option("--seed", wm.seed, "master seed");

  auto* c_tr = app.add_subcommand("train", "train a classifier");
  c_tr->add_option("--data", tr.data, "dataset directory");
  c_tr->add_option("--out", tr.out, "model file");
  c_tr->add_option("--arch", tr.arch, "logistic | mlp");
  c_tr->add_option("--epochs", tr.epochs, "training epochs");
  c_tr->add_option("--hidden", tr.hidden, "hidden width");
  c_tr->add_option("--lr", tr.lr, "learning rate");
  c_tr->add_option("--batch", tr.batch, "batch size");
  c_tr->add_option("--seed", tr.seed, "master seed");

  auto* c_cal = app.add_subcommand("calibrate", "build a calibration set from benign models");
  c_cal->add_option("--models", cal.models, "model files or glob patterns")->expected(1, -1);
  c_cal->add_option("--data", cal.data, "dataset directory holding the representative pool");
  c_cal->add_option("--out", cal.out, "calibration file");
  c_cal->add_option("--sigma", cal.sigma, "Gaussian noise level");
  c_cal->add_option("--samples", cal.samples, "Monte Carlo samples");
  c_cal->add_option("--kappa", cal.kappa, "outlier fraction");
  c_cal->add_option("--per-class", cal.per_class, "representatives per class");
  c_cal->add_option("--seed", cal.seed, "master seed");

  auto* c_ver = app.add_subcommand("verify", "test whether a model was trained on the protected dataset");
  add_suspect_flags(c_ver, ver);

  auto* c_cert = app.add_subcommand("certify", "check the certified watermark condition");
  add_suspect_flags(c_cert, cert.suspect);
  c_cert->add_option("--dist", cert.dist, "gaussian | uniform");
  c_cert->add_option("--low", cert.low, "uniform noise lower bound");
  c_cert->add_option("--high", cert.high, "uniform noise upper bound");
  c_cert->add_option("--region-out", cert.region_out, "region CSV path");
  c_cert->add_option("--region-radius", cert.region_radius, "LO,HI")->delimiter(',');
  c_cert->add_option("--region-robustness", cert.region_robustness, "LO,HI")->delimiter(',');
  c_cert->add_option("--grid", cert.grid, "region grid size");

  auto* c_sw = app.add_subcommand("sweep", "perturbation-grid WSR sweep");
  c_sw->add_option("--model", sw.model, "model file");
  c_sw->add_option("--trigger", sw.trigger, "trigger file");
  c_sw->add_option("--data", sw.data, "dataset directory");
  c_sw->add_option("--out", sw.out, "grid CSV path");
  c_sw->add_option("--eps-n", sw.eps_n, "noise-direction magnitudes")->delimiter(',');
  c_sw->add_option("--eps-a", sw.eps_a, "adversarial-direction magnitudes")->delimiter(',');
  c_sw->add_option("--sigma", sw.sigma, "noise level of the direction draw");
  c_sw->add_option("--seed", sw.seed, "master seed");

  auto* c_run = app.add_subcommand("run", "run the full experiment pipeline");
  c_run->add_option("--out", run.out, "report directory");
  c_run->add_option("--seed", run.seed, "master seed (overrides the config file)");
  c_run->add_option("--sigmas", run.sigmas, "noise levels (override the config file)")->delimiter(',');

  for (CLI::App* cmd : {c_gen, c_wm, c_tr, c_cal, c_ver, c_cert, c_sw, c_run}) {
    cmd->add_option("--config", config_path, "JSON file of flag values; command-line flags take precedence");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  if (!config_path.empty() && cmd != c_run) merge_config_file(*cmd, config_path);
  log_resolved(*cmd);

  if (cmd == c_gen) {
    require_flags(*cmd, {"--out"});
    return cmd_gen_data(gen);
  }
  if (cmd == c_wm) {
    require_flags(*cmd, {"--data", "--out"});
    return cmd_watermark(wm);
  }
  if (cmd == c_tr) {
    require_flags(*cmd, {"--data", "--out"});
    return cmd_train(tr);
  }
  if (cmd == c_cal) {
    require_flags(*cmd, {"--models", "--data", "--out"});
    return cmd_calibrate(cal);
  }
  if (cmd == c_ver) {
    require_flags(*cmd, {"--model", "--trigger", "--calib", "--data"});
    return cmd_verify(ver);
  }
  if (cmd == c_cert) {
    require_flags(*cmd, {"--model", "--trigger", "--calib", "--data"});
    return cmd_certify(cert);
  }
  if (cmd == c_sw) {
    require_flags(*cmd, {"--model", "--trigger", "--data", "--out"});
    return cmd_sweep(sw);
  }
  require_flags(*cmd, {"--out"});
  return cmd_run(config_path, run);
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("certdw");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitUsage;
  } catch (const certdw::IoError& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitIo;
  } catch (const certdw::TrainingFailureError& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitInternal;
  } catch (const certdw::Error& e) {
    std::cerr << "certdw: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "certdw: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
