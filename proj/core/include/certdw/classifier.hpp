#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "certdw/tensor.hpp"

namespace certdw {

enum class ClassifierKind { kLinear, kTable, kMlp };

std::string to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& name);

/// logits = weight * x + bias, weight stored row-major (K x d).
struct LinearParams {
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Hard-label lookup over a quantization grid. An input maps to the cell
/// floor(x_i / cell_size) per coordinate; cells absent from the table fall
/// back to default_label.
struct TableParams {
  double cell_size = 1.0;
  Label default_label = 0;
  std::map<std::vector<std::int64_t>, Label> cells;
};

/// One hidden ReLU layer: logits = w2 * relu(w1 * x + b1) + b2.
/// w1 is (hidden x d), w2 is (K x hidden), both row-major.
struct MlpParams {
  std::size_t hidden = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;
};

/// Immutable black-box classifier over C x H x W inputs with K >= 2 classes.
///
/// Safe to evaluate concurrently from any number of threads.
class Classifier {
 public:
  static Classifier linear(Shape input_shape, std::size_t num_classes, LinearParams params);
  static Classifier table(Shape input_shape, std::size_t num_classes, TableParams params);
  static Classifier mlp(Shape input_shape, std::size_t num_classes, MlpParams params);

  ClassifierKind kind() const noexcept;
  std::size_t num_classes() const noexcept { return num_classes_; }
  const Shape& input_shape() const noexcept { return input_shape_; }

  /// Length-K score vector. The table kind returns a one-hot indicator.
  std::vector<double> logits(const ImageTensor& x) const;
  Label predict(const ImageTensor& x) const;

  /// Unchecked hot-path variants over a flat buffer of input_shape().size()
  /// values; `out` must hold num_classes() entries.
  void logits_into(std::span<const double> x, std::span<double> out) const;
  Label predict_flat(std::span<const double> x) const;

  /// Gradient of softmax cross-entropy at (x, label) with respect to x.
  /// Only the MLP kind supports this; others raise UnsupportedOperationError.
  ImageTensor input_gradient(const ImageTensor& x, Label label) const;

  const LinearParams& linear_params() const;
  const TableParams& table_params() const;
  const MlpParams& mlp_params() const;

 private:
  using Params = std::variant<LinearParams, TableParams, MlpParams>;
  Classifier(Shape input_shape, std::size_t num_classes, Params params);

  Shape input_shape_;
  std::size_t num_classes_;
  Params params_;
  std::vector<double> w1_by_input_;  // mlp only: w1 transposed to (d x hidden)
};

/// Softmax cross-entropy of a logit vector against a label.
double cross_entropy(std::span<const double> logits, Label label);

}  // namespace certdw
