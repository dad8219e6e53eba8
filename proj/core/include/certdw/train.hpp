#pragma once

#include <string>

#include "certdw/classifier.hpp"
#include "certdw/dataset.hpp"
#include "certdw/numerics.hpp"
#include "certdw/watermark.hpp"

namespace certdw {

enum class Architecture { kLogistic, kMlp };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& name);

struct TrainConfig {
  Architecture arch = Architecture::kMlp;
  std::size_t hidden = 32;
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Mini-batch SGD on softmax cross-entropy. Initialization and per-epoch
/// shuffles come from `stream`, so equal streams give bit-identical models.
/// Logistic yields a linear classifier, MLP a one-hidden-layer ReLU network.
/// Throws TrainingFailureError if the loss becomes non-finite.
Classifier train_model(const LabeledDataset& train, const TrainConfig& config, const SeededStream& stream);

/// Fraction of samples predicted as their label.
double evaluate_ba(const Classifier& model, const LabeledDataset& test);

/// Fraction of triggered samples predicted as the target label, over samples
/// whose own label differs from the target.
double evaluate_wsr(const Classifier& model, const LabeledDataset& test, const TriggerSpec& trigger);

}  // namespace certdw
