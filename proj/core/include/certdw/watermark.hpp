#pragma once

#include <string>
#include <vector>

#include "certdw/dataset.hpp"
#include "certdw/numerics.hpp"
#include "certdw/tensor.hpp"

namespace certdw {

enum class TriggerKind { kBadNetsPatch, kBlendedPatch, kBlendedNoise };

std::string to_string(TriggerKind kind);
/// Accepts "badnets", "blended-patch", "blended-noise".
TriggerKind trigger_kind_from_string(const std::string& name);

inline constexpr double kDefaultBlendAlpha = 0.2;
inline constexpr std::size_t kDefaultPatchSize = 3;

/// A dataset watermark: image transformation plus target label.
///
/// Patch kinds carry a binary mask (1 on the patch, 0 elsewhere) and a
/// pattern; the noise kind carries the additive pattern v in `pattern` and an
/// all-zero mask.
struct TriggerSpec {
  TriggerKind kind = TriggerKind::kBadNetsPatch;
  Shape shape;
  std::vector<double> mask;
  std::vector<double> pattern;
  double blend_alpha = kDefaultBlendAlpha;
  Label target_label = 0;
  double l2_budget = 0.0;
  std::size_t patch_row = 0;
  std::size_t patch_col = 0;
  std::size_t patch_size = 0;

  void validate() const;
  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

/// Random-pixel square patch at a random, thereafter fixed, location.
TriggerSpec make_badnets_trigger(const Shape& shape, std::size_t patch_size, Label target,
                                 const SeededStream& stream);
TriggerSpec make_blended_patch_trigger(const Shape& shape, std::size_t patch_size, double blend_alpha,
                                       Label target, const SeededStream& stream);
/// Full-image additive pattern with Euclidean norm exactly l2_budget.
TriggerSpec make_blended_noise_trigger(const Shape& shape, double l2_budget, Label target,
                                       const SeededStream& stream);

/// BadNets: (1 - mask) * x + mask * pattern. Blended patch: x + alpha * mask *
/// (pattern - x). Blended noise: x + pattern. With clip, the result is clamped
/// to [0, 1].
ImageTensor apply_trigger(const ImageTensor& x, const TriggerSpec& trigger, bool clip = true);

struct WatermarkedDataset {
  LabeledDataset data;
  std::vector<std::size_t> poisoned_indices;  // ascending
};

/// Replaces floor(rate * N) uniformly chosen samples by (apply_trigger(x), target).
WatermarkedDataset poison_dataset(const LabeledDataset& data, const TriggerSpec& trigger, double rate,
                                  const SeededStream& stream);

/// Per-sample residual norms ||apply_trigger(x_k) - x_k||_2.
std::vector<double> trigger_residual_norms(const TriggerSpec& trigger, const std::vector<ImageTensor>& samples,
                                           bool clip);

/// max_k ||apply_trigger(x_k) - x_k||_2 over the actually applied residuals.
double trigger_radius(const TriggerSpec& trigger, const std::vector<ImageTensor>& samples, bool clip);

}  // namespace certdw
