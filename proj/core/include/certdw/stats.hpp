#pragma once

#include <string>
#include <vector>

#include "certdw/classifier.hpp"
#include "certdw/dataset.hpp"
#include "certdw/smoothing.hpp"
#include "certdw/watermark.hpp"

namespace certdw {

/// Correctly predicted samples, `per_class` for each class, grouped by class
/// (samples[k * per_class + j] has label k). `source` names the model whose
/// predictions certified correctness.
struct ClassRepresentatives {
  std::vector<ImageTensor> samples;
  std::vector<Label> labels;
  std::size_t per_class = 1;
  std::string source;
};

/// For each class k, uniformly random pool samples with true label k that the
/// classifier also predicts as k. Throws RepresentativeUnavailableError naming
/// the first class with too few such samples.
ClassRepresentatives select_class_representatives(const Classifier& classifier, const LabeledDataset& pool,
                                                  const SeededStream& stream, std::size_t per_class = 1,
                                                  std::string source = {});

/// Smoothing settings shared by the statistics below. Sample i is estimated
/// on stream.substream(i).
struct SmoothingRun {
  NoiseSpec noise;
  std::uint64_t samples = 1024;
  SeededStream stream{0};
  std::size_t workers = 1;
};

/// Prediction distribution of every representative.
std::vector<PredictionDistribution> representative_pds(const Classifier& classifier,
                                                       const std::vector<ImageTensor>& inputs,
                                                       const SmoothingRun& run);

/// Max entry of the entry-wise mean of the representatives' prediction
/// distributions.
double principal_probability(const Classifier& classifier, const ClassRepresentatives& reps,
                             const SmoothingRun& run);

/// min over representatives of P(predict(apply_trigger(x_k) + eps) = target).
double watermark_robustness(const Classifier& classifier, const ClassRepresentatives& reps,
                            const TriggerSpec& trigger, const SmoothingRun& run);

/// min over representatives of P(predict(x_k + eps) = target).
double stability(const Classifier& classifier, const ClassRepresentatives& reps, Label target,
                 const SmoothingRun& run);

/// Reductions used above, exposed for direct testing.
double principal_probability_of(const std::vector<PredictionDistribution>& pds);
double min_target_probability(const std::vector<PredictionDistribution>& pds, Label target);

}  // namespace certdw
