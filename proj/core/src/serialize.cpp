#include "certdw/serialize.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "certdw/error.hpp"

namespace certdw {
namespace {

using Json = nlohmann::ordered_json;

Json shape_json(const Shape& s) { return Json::array({s.channels, s.height, s.width}); }

Shape shape_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("shape must be [C, H, W]");
  return Shape{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

Json param(const std::string& name, std::vector<std::size_t> shape, const std::vector<double>& data) {
  return Json{{"name", name}, {"shape", shape}, {"data", data}};
}

const Json& find_param(const Json& params, const std::string& name) {
  for (const auto& p : params) {
    if (p.at("name").get<std::string>() == name) return p;
  }
  throw IoError("model document lacks parameter '" + name + "'");
}

std::vector<double> param_data(const Json& params, const std::string& name, std::size_t expected) {
  const auto& p = find_param(params, name);
  auto data = p.at("data").get<std::vector<double>>();
  std::size_t declared = 1;
  for (const auto& n : p.at("shape")) declared *= n.get<std::size_t>();
  if (data.size() != expected || declared != expected) {
    throw IoError("parameter '" + name + "' has " + std::to_string(data.size()) + " values, expected " +
                  std::to_string(expected));
  }
  return data;
}

template <typename F>
auto parse_guarded(const std::string& what, F&& body) {
  try {
    return body();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": " + e.what());
  } catch (const DomainError& e) {
    throw IoError(what + ": " + e.what());
  }
}

Json noise_json(const NoiseSpec& spec) {
  Json j{{"family", to_string(spec.family)}};
  if (spec.family == NoiseFamily::kGaussian) {
    j["sigma"] = spec.sigma;
  } else {
    j["low"] = spec.low;
    j["high"] = spec.high;
  }
  j["clip"] = spec.clip;
  return j;
}

NoiseSpec noise_from(const Json& j) {
  NoiseSpec spec;
  spec.family = noise_family_from_string(j.at("family").get<std::string>());
  if (spec.family == NoiseFamily::kGaussian) {
    spec.sigma = j.at("sigma").get<double>();
  } else {
    spec.low = j.at("low").get<double>();
    spec.high = j.at("high").get<double>();
  }
  spec.clip = j.value("clip", false);
  spec.validate();
  return spec;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string classifier_to_json(const Classifier& model) {
  const std::size_t d = model.input_shape().size();
  const std::size_t k = model.num_classes();
  Json j;
  j["kind"] = to_string(model.kind());
  j["num_classes"] = k;
  j["input_shape"] = shape_json(model.input_shape());
  Json params = Json::array();
  switch (model.kind()) {
    case ClassifierKind::kLinear: {
      const auto& p = model.linear_params();
      params.push_back(param("weight", {k, d}, p.weight));
      params.push_back(param("bias", {k}, p.bias));
      break;
    }
    case ClassifierKind::kMlp: {
      const auto& p = model.mlp_params();
      params.push_back(param("w1", {p.hidden, d}, p.w1));
      params.push_back(param("b1", {p.hidden}, p.b1));
      params.push_back(param("w2", {k, p.hidden}, p.w2));
      params.push_back(param("b2", {k}, p.b2));
      break;
    }
    case ClassifierKind::kTable: {
      const auto& p = model.table_params();
      std::vector<double> keys;
      std::vector<double> labels;
      for (const auto& [key, label] : p.cells) {
        for (auto v : key) keys.push_back(static_cast<double>(v));
        labels.push_back(label);
      }
      params.push_back(param("cell_size", {1}, {p.cell_size}));
      params.push_back(param("default_label", {1}, {static_cast<double>(p.default_label)}));
      params.push_back(param("cell_keys", {p.cells.size(), d}, keys));
      params.push_back(param("cell_labels", {p.cells.size()}, labels));
      break;
    }
  }
  j["parameters"] = std::move(params);
  return j.dump(1) + "\n";
}

Classifier classifier_from_json(const std::string& text) {
  return parse_guarded("model document", [&] {
    const auto j = Json::parse(text);
    const auto kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    const auto k = j.at("num_classes").get<std::size_t>();
    const Shape shape = shape_from(j.at("input_shape"));
    const std::size_t d = shape.size();
    const auto& params = j.at("parameters");
    switch (kind) {
      case ClassifierKind::kLinear:
        return Classifier::linear(shape, k, LinearParams{param_data(params, "weight", k * d),
                                                         param_data(params, "bias", k)});
      case ClassifierKind::kMlp: {
        const auto& w1 = find_param(params, "w1");
        const auto h = w1.at("shape").at(0).get<std::size_t>();
        return Classifier::mlp(shape, k,
                               MlpParams{h, param_data(params, "w1", h * d), param_data(params, "b1", h),
                                         param_data(params, "w2", k * h), param_data(params, "b2", k)});
      }
      case ClassifierKind::kTable: {
        TableParams p;
        p.cell_size = param_data(params, "cell_size", 1)[0];
        p.default_label = static_cast<Label>(param_data(params, "default_label", 1)[0]);
        const auto n = find_param(params, "cell_labels").at("shape").at(0).get<std::size_t>();
        const auto keys = param_data(params, "cell_keys", n * d);
        const auto labels = param_data(params, "cell_labels", n);
        for (std::size_t c = 0; c < n; ++c) {
          std::vector<std::int64_t> key(d);
          for (std::size_t i = 0; i < d; ++i) key[i] = static_cast<std::int64_t>(keys[c * d + i]);
          p.cells.emplace(std::move(key), static_cast<Label>(labels[c]));
        }
        return Classifier::table(shape, k, std::move(p));
      }
    }
    throw IoError("unreachable classifier kind");
  });
}

void save_classifier(const Classifier& model, const std::filesystem::path& path) {
  write_text_file(path, classifier_to_json(model));
}

Classifier load_classifier(const std::filesystem::path& path) { return classifier_from_json(read_text_file(path)); }

std::string trigger_to_json(const TriggerSpec& trigger) {
  Json j;
  j["kind"] = to_string(trigger.kind);
  j["target_label"] = trigger.target_label;
  j["blend_alpha"] = trigger.blend_alpha;
  j["l2_budget"] = trigger.l2_budget;
  j["patch_origin"] = {trigger.patch_row, trigger.patch_col};
  j["patch_size"] = trigger.patch_size;
  j["shape"] = shape_json(trigger.shape);
  j["mask"] = trigger.mask;
  j["pattern"] = trigger.pattern;
  return j.dump(1) + "\n";
}

TriggerSpec trigger_from_json(const std::string& text) {
  return parse_guarded("trigger document", [&] {
    const auto j = Json::parse(text);
    TriggerSpec t;
    t.kind = trigger_kind_from_string(j.at("kind").get<std::string>());
    t.target_label = j.at("target_label").get<Label>();
    t.blend_alpha = j.at("blend_alpha").get<double>();
    t.l2_budget = j.at("l2_budget").get<double>();
    const auto& origin = j.at("patch_origin");
    t.patch_row = origin.at(0).get<std::size_t>();
    t.patch_col = origin.at(1).get<std::size_t>();
    t.patch_size = j.value("patch_size", std::size_t{0});
    t.shape = shape_from(j.at("shape"));
    t.mask = j.at("mask").get<std::vector<double>>();
    t.pattern = j.at("pattern").get<std::vector<double>>();
    t.validate();
    return t;
  });
}

void save_trigger(const TriggerSpec& trigger, const std::filesystem::path& path) {
  write_text_file(path, trigger_to_json(trigger));
}

TriggerSpec load_trigger(const std::filesystem::path& path) { return trigger_from_json(read_text_file(path)); }

std::string noise_spec_to_json(const NoiseSpec& spec) { return noise_json(spec).dump(); }

NoiseSpec noise_spec_from_json(const std::string& text) {
  return parse_guarded("noise spec", [&] { return noise_from(Json::parse(text)); });
}

std::string calibration_to_json(const CalibrationFile& calib) {
  Json j;
  j["pp_values"] = calib.set.pp_values;
  j["kappa"] = calib.set.kappa;
  j["m"] = calib.set.filtered;
  j["noise_spec"] = noise_json(calib.noise);
  j["M"] = calib.samples;
  j["model_ids"] = calib.set.model_ids;
  j["master_seed"] = calib.master_seed;
  return j.dump(2) + "\n";
}

CalibrationFile calibration_from_json(const std::string& text) {
  return parse_guarded("calibration document", [&] {
    const auto j = Json::parse(text);
    CalibrationFile c;
    c.set.pp_values = j.at("pp_values").get<std::vector<double>>();
    c.set.kappa = j.at("kappa").get<double>();
    c.set.filtered = j.at("m").get<std::size_t>();
    c.set.model_ids = j.value("model_ids", std::vector<std::string>{});
    c.noise = noise_from(j.at("noise_spec"));
    c.samples = j.at("M").get<std::uint64_t>();
    c.master_seed = j.value("master_seed", std::uint64_t{0});
    c.set.validate();
    return c;
  });
}

void save_calibration(const CalibrationFile& calib, const std::filesystem::path& path) {
  write_text_file(path, calibration_to_json(calib));
}

CalibrationFile load_calibration(const std::filesystem::path& path) {
  return calibration_from_json(read_text_file(path));
}

}  // namespace certdw
