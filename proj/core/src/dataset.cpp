#include "certdw/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "certdw/error.hpp"

namespace certdw {
namespace {

static_assert(std::endian::native == std::endian::little, "raw dataset I/O assumes little-endian");

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != count * sizeof(T)) {
    throw IoError(path.string() + ": expected " + std::to_string(count * sizeof(T)) + " bytes, found " +
                  std::to_string(bytes));
  }
  in.seekg(0);
  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("failed reading " + path.string());
  return values;
}

}  // namespace

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw DomainError("unknown split '" + name + "'");
}

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw DomainError("dataset: image and label counts differ");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_shape(images[i], shape, "dataset");
    if (labels[i] >= num_classes) {
      throw DomainError("dataset: label " + std::to_string(labels[i]) + " out of range");
    }
  }
}

std::vector<ImageTensor> toy_class_means(const ToyDataConfig& config, const SeededStream& stream) {
  std::vector<ImageTensor> means;
  means.reserve(config.num_classes);
  for (std::size_t k = 0; k < config.num_classes; ++k) {
    auto engine = stream.derive({0, k}).engine();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ImageTensor mean(config.shape, 0.0);
    for (double& v : mean.values) v = unit(engine);
    means.push_back(std::move(mean));
  }
  return means;
}

std::pair<LabeledDataset, LabeledDataset> gen_toy_dataset(const ToyDataConfig& config,
                                                          const SeededStream& stream) {
  if (config.num_classes < 2) throw DomainError("gen_toy_dataset: need at least two classes");
  if (config.per_class < 2) throw DomainError("gen_toy_dataset: need at least two samples per class");
  if (config.shape.size() == 0) throw DomainError("gen_toy_dataset: empty shape");
  if (!(config.noise_std >= 0.0)) throw DomainError("gen_toy_dataset: negative noise");

  const auto means = toy_class_means(config, stream);
  const std::size_t n_train =
      std::clamp<std::size_t>(config.per_class * 4 / 5, 1, config.per_class - 1);

  LabeledDataset train{config.shape, config.num_classes, Split::kTrain, {}, {}};
  LabeledDataset test{config.shape, config.num_classes, Split::kTest, {}, {}};
  for (std::size_t k = 0; k < config.num_classes; ++k) {
    auto engine = stream.derive({1, k}).engine();
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < config.per_class; ++i) {
      ImageTensor x = means[k];
      for (double& v : x.values) {
        v = static_cast<float>(std::clamp(v + config.noise_std * noise(engine), 0.0, 1.0));
      }
      auto& target = i < n_train ? train : test;
      target.images.push_back(std::move(x));
      target.labels.push_back(static_cast<Label>(k));
    }
  }
  return {std::move(train), std::move(test)};
}

void save_dataset(const LabeledDataset& data, const std::filesystem::path& dir) {
  data.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["shape"] = {data.shape.channels, data.shape.height, data.shape.width};
  meta["count"] = data.size();
  meta["num_classes"] = data.num_classes;
  meta["split"] = to_string(data.split);
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';

  std::vector<float> pixels;
  pixels.reserve(data.size() * data.shape.size());
  for (const auto& img : data.images) {
    for (double v : img.values) pixels.push_back(static_cast<float>(v));
  }
  write_raw(dir / "data.f32le", pixels);
  write_raw(dir / "labels.u32le", data.labels);
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw IoError("cannot open " + (dir / "meta.json").string());
  LabeledDataset data;
  std::size_t count = 0;
  try {
    const auto meta = nlohmann::json::parse(in);
    const auto& shape = meta.at("shape");
    if (!shape.is_array() || shape.size() != 3) throw IoError("meta.json: shape must have three entries");
    data.shape = Shape{shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), shape[2].get<std::size_t>()};
    count = meta.at("count").get<std::size_t>();
    data.num_classes = meta.at("num_classes").get<std::size_t>();
    data.split = split_from_string(meta.at("split").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + "/meta.json: " + e.what());
  }
  const auto pixels = read_raw<float>(dir / "data.f32le", count * data.shape.size());
  data.labels = read_raw<Label>(dir / "labels.u32le", count);
  data.images.reserve(count);
  const std::size_t d = data.shape.size();
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> values(pixels.begin() + static_cast<std::ptrdiff_t>(i * d),
                               pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    data.images.emplace_back(data.shape, std::move(values));
  }
  try {
    data.validate();
  } catch (const DomainError& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  return data;
}

}  // namespace certdw
