#include "certdw/stats.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "certdw/error.hpp"
#include "certdw/numerics.hpp"

namespace certdw {

ClassRepresentatives select_class_representatives(const Classifier& classifier, const LabeledDataset& pool,
                                                  const SeededStream& stream, std::size_t per_class,
                                                  std::string source) {
  if (per_class == 0) throw DomainError("select_class_representatives: per_class must be positive");
  if (pool.shape != classifier.input_shape()) {
    throw DomainError("select_class_representatives: pool shape does not match the classifier");
  }
  const std::size_t k_classes = classifier.num_classes();
  std::vector<std::vector<std::size_t>> candidates(k_classes);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Label y = pool.labels[i];
    if (y < k_classes && classifier.predict(pool.images[i]) == y) candidates[y].push_back(i);
  }

  ClassRepresentatives reps;
  reps.per_class = per_class;
  reps.source = std::move(source);
  for (std::size_t k = 0; k < k_classes; ++k) {
    auto& cand = candidates[k];
    if (cand.size() < per_class) {
      throw RepresentativeUnavailableError(
          k, "no correctly predicted sample available for class " + std::to_string(k) +
                 (cand.empty() ? std::string() : " (need " + std::to_string(per_class) + ")"));
    }
    auto engine = stream.substream(k).engine();
    for (std::size_t j = 0; j < per_class; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, cand.size() - 1);
      std::swap(cand[j], cand[pick(engine)]);
      reps.samples.push_back(pool.images[cand[j]]);
      reps.labels.push_back(static_cast<Label>(k));
    }
  }
  return reps;
}

std::vector<PredictionDistribution> representative_pds(const Classifier& classifier,
                                                       const std::vector<ImageTensor>& inputs,
                                                       const SmoothingRun& run) {
  std::vector<PredictionDistribution> pds;
  pds.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    pds.push_back(estimate_pd(classifier, inputs[i], run.noise, run.samples, run.stream.substream(i),
                              run.workers));
  }
  return pds;
}

double principal_probability_of(const std::vector<PredictionDistribution>& pds) {
  if (pds.empty()) throw DomainError("principal_probability: no distributions");
  const std::size_t k = pds.front().counts.size();
  std::vector<double> mean(k, 0.0);
  for (const auto& pd : pds) {
    if (pd.counts.size() != k) throw DomainError("principal_probability: class counts differ");
    const auto probs = pd.probabilities();
    for (std::size_t c = 0; c < k; ++c) mean[c] += probs[c];
  }
  for (double& v : mean) v /= static_cast<double>(pds.size());
  return *std::max_element(mean.begin(), mean.end());
}

double min_target_probability(const std::vector<PredictionDistribution>& pds, Label target) {
  if (pds.empty()) throw DomainError("min_target_probability: no distributions");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& pd : pds) best = std::min(best, pd.probability(target));
  return best;
}

double principal_probability(const Classifier& classifier, const ClassRepresentatives& reps,
                             const SmoothingRun& run) {
  return principal_probability_of(representative_pds(classifier, reps.samples, run));
}

double watermark_robustness(const Classifier& classifier, const ClassRepresentatives& reps,
                            const TriggerSpec& trigger, const SmoothingRun& run) {
  if (trigger.target_label >= classifier.num_classes()) {
    throw DomainError("watermark_robustness: target label out of range");
  }
  std::vector<ImageTensor> triggered;
  triggered.reserve(reps.samples.size());
  for (const auto& x : reps.samples) triggered.push_back(apply_trigger(x, trigger, true));
  return min_target_probability(representative_pds(classifier, triggered, run), trigger.target_label);
}

double stability(const Classifier& classifier, const ClassRepresentatives& reps, Label target,
                 const SmoothingRun& run) {
  if (target >= classifier.num_classes()) throw DomainError("stability: target label out of range");
  return min_target_probability(representative_pds(classifier, reps.samples, run), target);
}

}  // namespace certdw
