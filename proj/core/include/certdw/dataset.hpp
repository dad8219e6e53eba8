#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "certdw/numerics.hpp"
#include "certdw/tensor.hpp"

namespace certdw {

enum class Split { kTrain, kTest };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

/// N labeled images of one shape; labels lie in [0, num_classes).
struct LabeledDataset {
  Shape shape;
  std::size_t num_classes = 0;
  Split split = Split::kTrain;
  std::vector<ImageTensor> images;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  /// Throws DomainError when lengths, shapes or labels are inconsistent.
  void validate() const;
};

struct ToyDataConfig {
  std::size_t num_classes = 4;
  std::size_t per_class = 100;
  Shape shape{3, 8, 8};
  double noise_std = 0.1;
  friend bool operator==(const ToyDataConfig&, const ToyDataConfig&) = default;
};

/// Gaussian blobs around one uniform random base pattern per class, clipped
/// to [0, 1]. Each class is split 80/20 into train and test. Pixel values are
/// rounded to float precision so the on-disk format round-trips exactly.
std::pair<LabeledDataset, LabeledDataset> gen_toy_dataset(const ToyDataConfig& config,
                                                          const SeededStream& stream);

/// The per-class base patterns gen_toy_dataset would use for this stream.
std::vector<ImageTensor> toy_class_means(const ToyDataConfig& config, const SeededStream& stream);

/// Directory format: meta.json, data.f32le (C-order little-endian float32),
/// labels.u32le (little-endian uint32).
void save_dataset(const LabeledDataset& data, const std::filesystem::path& dir);
LabeledDataset load_dataset(const std::filesystem::path& dir);

}  // namespace certdw
