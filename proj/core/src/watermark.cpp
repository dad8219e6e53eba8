#include "certdw/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "certdw/error.hpp"

namespace certdw {
namespace {

TriggerSpec make_patch_trigger(TriggerKind kind, const Shape& shape, std::size_t patch_size,
                               Label target, const SeededStream& stream) {
  if (patch_size == 0 || patch_size > shape.height || patch_size > shape.width) {
    throw DomainError("trigger: patch of size " + std::to_string(patch_size) + " does not fit in " +
                      shape.to_string());
  }
  auto engine = stream.engine();
  std::uniform_int_distribution<std::size_t> row_dist(0, shape.height - patch_size);
  std::uniform_int_distribution<std::size_t> col_dist(0, shape.width - patch_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TriggerSpec trig;
  trig.kind = kind;
  trig.shape = shape;
  trig.target_label = target;
  trig.patch_size = patch_size;
  trig.patch_row = row_dist(engine);
  trig.patch_col = col_dist(engine);
  trig.mask.assign(shape.size(), 0.0);
  trig.pattern.assign(shape.size(), 0.0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t r = 0; r < patch_size; ++r) {
      for (std::size_t q = 0; q < patch_size; ++q) {
        const std::size_t i = shape.index(c, trig.patch_row + r, trig.patch_col + q);
        trig.mask[i] = 1.0;
        trig.pattern[i] = unit(engine);
      }
    }
  }
  return trig;
}

}  // namespace

std::string to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::kBadNetsPatch:
      return "badnets";
    case TriggerKind::kBlendedPatch:
      return "blended-patch";
    case TriggerKind::kBlendedNoise:
      return "blended-noise";
  }
  return "unknown";
}

TriggerKind trigger_kind_from_string(const std::string& name) {
  if (name == "badnets") return TriggerKind::kBadNetsPatch;
  if (name == "blended-patch") return TriggerKind::kBlendedPatch;
  if (name == "blended-noise") return TriggerKind::kBlendedNoise;
  throw DomainError("unknown trigger kind '" + name + "'");
}

void TriggerSpec::validate() const {
  if (mask.size() != shape.size() || pattern.size() != shape.size()) {
    throw DomainError("trigger: mask/pattern size does not match shape " + shape.to_string());
  }
  if (!(blend_alpha >= 0.0 && blend_alpha <= 1.0)) {
    throw DomainError("trigger: blend alpha must lie in [0, 1]");
  }
  for (double m : mask) {
    if (!(m >= 0.0 && m <= 1.0)) throw DomainError("trigger: mask entries must lie in [0, 1]");
    if (kind == TriggerKind::kBadNetsPatch && m != 0.0 && m != 1.0) {
      throw DomainError("trigger: badnets mask must be binary");
    }
  }
  for (double p : pattern) {
    if (!std::isfinite(p)) throw DomainError("trigger: non-finite pattern");
  }
}

TriggerSpec make_badnets_trigger(const Shape& shape, std::size_t patch_size, Label target,
                                 const SeededStream& stream) {
  return make_patch_trigger(TriggerKind::kBadNetsPatch, shape, patch_size, target, stream);
}

TriggerSpec make_blended_patch_trigger(const Shape& shape, std::size_t patch_size, double blend_alpha,
                                       Label target, const SeededStream& stream) {
  if (!(blend_alpha >= 0.0 && blend_alpha <= 1.0)) {
    throw DomainError("trigger: blend alpha must lie in [0, 1]");
  }
  auto trig = make_patch_trigger(TriggerKind::kBlendedPatch, shape, patch_size, target, stream);
  trig.blend_alpha = blend_alpha;
  return trig;
}

TriggerSpec make_blended_noise_trigger(const Shape& shape, double l2_budget, Label target,
                                       const SeededStream& stream) {
  if (!(l2_budget > 0.0) || !std::isfinite(l2_budget)) {
    throw DegenerateTriggerError("trigger: blended-noise budget must be positive");
  }
  if (shape.size() == 0) throw DomainError("trigger: empty shape");
  auto engine = stream.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> direction(shape.size());
  for (double& v : direction) v = normal(engine);

  TriggerSpec trig;
  trig.kind = TriggerKind::kBlendedNoise;
  trig.shape = shape;
  trig.target_label = target;
  trig.l2_budget = l2_budget;
  trig.mask.assign(shape.size(), 0.0);
  trig.pattern = l2_rescale(direction, l2_budget);
  return trig;
}

ImageTensor apply_trigger(const ImageTensor& x, const TriggerSpec& trigger, bool clip) {
  require_shape(x, trigger.shape, "apply_trigger");
  ImageTensor out = x;
  auto& v = out.values;
  switch (trigger.kind) {
    case TriggerKind::kBadNetsPatch:
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (trigger.mask[i] != 0.0) v[i] = (1.0 - trigger.mask[i]) * v[i] + trigger.mask[i] * trigger.pattern[i];
      }
      break;
    case TriggerKind::kBlendedPatch:
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (trigger.mask[i] != 0.0) {
          const double a = trigger.blend_alpha * trigger.mask[i];
          v[i] = (1.0 - a) * v[i] + a * trigger.pattern[i];
        }
      }
      break;
    case TriggerKind::kBlendedNoise:
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += trigger.pattern[i];
      break;
  }
  if (clip) clip_unit(v);
  return out;
}

WatermarkedDataset poison_dataset(const LabeledDataset& data, const TriggerSpec& trigger, double rate,
                                  const SeededStream& stream) {
  if (data.empty()) throw DomainError("poison_dataset: empty dataset");
  if (!(rate > 0.0 && rate <= 1.0)) throw DomainError("poison_dataset: rate must lie in (0, 1]");
  if (trigger.target_label >= data.num_classes) {
    throw DomainError("poison_dataset: target label out of range");
  }
  const std::size_t n = data.size();
  // Guard against 0.1 * 100 landing just below 10.
  const auto count = std::min(n, static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto engine = stream.engine();
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(engine)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  WatermarkedDataset out{data, chosen};
  for (std::size_t idx : chosen) {
    out.data.images[idx] = apply_trigger(data.images[idx], trigger, true);
    out.data.labels[idx] = trigger.target_label;
  }
  return out;
}

std::vector<double> trigger_residual_norms(const TriggerSpec& trigger, const std::vector<ImageTensor>& samples,
                                           bool clip) {
  std::vector<double> norms;
  norms.reserve(samples.size());
  for (const auto& x : samples) {
    const auto triggered = apply_trigger(x, trigger, clip);
    double sum = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      const double r = triggered.values[i] - x.values[i];
      sum += r * r;
    }
    norms.push_back(std::sqrt(sum));
  }
  return norms;
}

double trigger_radius(const TriggerSpec& trigger, const std::vector<ImageTensor>& samples, bool clip) {
  if (samples.empty()) throw DomainError("trigger_radius: no samples");
  const auto norms = trigger_residual_norms(trigger, samples, clip);
  return *std::max_element(norms.begin(), norms.end());
}

}  // namespace certdw
