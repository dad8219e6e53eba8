#include "certdw/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "certdw/error.hpp"
#include "certdw/numerics.hpp"

namespace certdw {
namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string("classifier: non-finite entry in ") + what);
    }
  }
}

// pre = b1 + w1 x accumulated input by input; w1t is w1 transposed (d x h).
// Element-wise, so both clones give identical results.
__attribute__((target_clones("avx2", "default"))) void accumulate_columns(const double* __restrict w1t,
                                                                           const double* __restrict x,
                                                                           std::size_t d, std::size_t h,
                                                                           double* __restrict pre) {
  for (std::size_t i = 0; i < d; ++i) {
    const double xi = x[i];
    const double* col = w1t + i * h;
    for (std::size_t j = 0; j < h; ++j) pre[j] += col[j] * xi;
  }
}

void hidden_activations(const MlpParams& p, const std::vector<double>& w1t, std::span<const double> x,
                        std::span<double> pre, std::span<double> act) {
  const std::size_t h = p.hidden;
  std::copy(p.b1.begin(), p.b1.end(), pre.begin());
  accumulate_columns(w1t.data(), x.data(), x.size(), h, pre.data());
  for (std::size_t j = 0; j < h; ++j) act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
}

}  // namespace

std::string to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::kLinear:
      return "linear";
    case ClassifierKind::kTable:
      return "table";
    case ClassifierKind::kMlp:
      return "mlp";
  }
  return "unknown";
}

ClassifierKind classifier_kind_from_string(const std::string& name) {
  if (name == "linear") return ClassifierKind::kLinear;
  if (name == "table") return ClassifierKind::kTable;
  if (name == "mlp") return ClassifierKind::kMlp;
  throw DomainError("unknown classifier kind '" + name + "'");
}

Classifier::Classifier(Shape input_shape, std::size_t num_classes, Params params)
    : input_shape_(input_shape), num_classes_(num_classes), params_(std::move(params)) {
  if (num_classes_ < 2) {
    throw DomainError("classifier: need at least two classes");
  }
  if (input_shape_.size() == 0) {
    throw DomainError("classifier: empty input shape");
  }
}

Classifier Classifier::linear(Shape input_shape, std::size_t num_classes, LinearParams params) {
  const std::size_t d = input_shape.size();
  if (params.weight.size() != num_classes * d || params.bias.size() != num_classes) {
    throw DomainError("linear classifier: parameter shapes do not match K x d");
  }
  require_finite(params.weight, "weight");
  require_finite(params.bias, "bias");
  return Classifier(input_shape, num_classes, std::move(params));
}

Classifier Classifier::table(Shape input_shape, std::size_t num_classes, TableParams params) {
  if (!(params.cell_size > 0.0) || !std::isfinite(params.cell_size)) {
    throw DomainError("table classifier: cell size must be positive");
  }
  if (params.default_label >= num_classes) {
    throw DomainError("table classifier: default label out of range");
  }
  for (const auto& [key, label] : params.cells) {
    if (key.size() != input_shape.size()) {
      throw DomainError("table classifier: cell key has wrong dimension");
    }
    if (label >= num_classes) {
      throw DomainError("table classifier: cell label out of range");
    }
  }
  return Classifier(input_shape, num_classes, std::move(params));
}

Classifier Classifier::mlp(Shape input_shape, std::size_t num_classes, MlpParams params) {
  const std::size_t d = input_shape.size();
  const std::size_t h = params.hidden;
  if (h == 0 || params.w1.size() != h * d || params.b1.size() != h ||
      params.w2.size() != num_classes * h || params.b2.size() != num_classes) {
    throw DomainError("mlp classifier: parameter shapes are inconsistent");
  }
  require_finite(params.w1, "w1");
  require_finite(params.b1, "b1");
  require_finite(params.w2, "w2");
  require_finite(params.b2, "b2");
  std::vector<double> w1t(h * d);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < d; ++i) w1t[i * h + j] = params.w1[j * d + i];
  }
  Classifier out(input_shape, num_classes, std::move(params));
  out.w1_by_input_ = std::move(w1t);
  return out;
}

ClassifierKind Classifier::kind() const noexcept {
  return static_cast<ClassifierKind>(params_.index());
}

const LinearParams& Classifier::linear_params() const {
  if (const auto* p = std::get_if<LinearParams>(&params_)) return *p;
  throw UnsupportedOperationError("classifier is not linear");
}

const TableParams& Classifier::table_params() const {
  if (const auto* p = std::get_if<TableParams>(&params_)) return *p;
  throw UnsupportedOperationError("classifier is not a table");
}

const MlpParams& Classifier::mlp_params() const {
  if (const auto* p = std::get_if<MlpParams>(&params_)) return *p;
  throw UnsupportedOperationError("classifier is not an mlp");
}

void Classifier::logits_into(std::span<const double> x, std::span<double> out) const {
  const std::size_t d = x.size();
  const std::size_t k = num_classes_;
  if (const auto* lin = std::get_if<LinearParams>(&params_)) {
    for (std::size_t c = 0; c < k; ++c) {
      const double* row = lin->weight.data() + c * d;
      double sum = lin->bias[c];
      for (std::size_t i = 0; i < d; ++i) {
        sum += row[i] * x[i];
      }
      out[c] = sum;
    }
  } else if (const auto* tab = std::get_if<TableParams>(&params_)) {
    std::vector<std::int64_t> key(d);
    for (std::size_t i = 0; i < d; ++i) {
      key[i] = static_cast<std::int64_t>(std::floor(x[i] / tab->cell_size));
    }
    const auto it = tab->cells.find(key);
    const Label label = it == tab->cells.end() ? tab->default_label : it->second;
    std::fill(out.begin(), out.end(), 0.0);
    out[label] = 1.0;
  } else {
    const auto& mlp = std::get<MlpParams>(params_);
    constexpr std::size_t kInline = 128;
    double pre_buf[kInline];
    double act_buf[kInline];
    std::vector<double> pre_heap, act_heap;
    std::span<double> pre(pre_buf, std::min(mlp.hidden, kInline));
    std::span<double> act(act_buf, std::min(mlp.hidden, kInline));
    if (mlp.hidden > kInline) {
      pre_heap.resize(mlp.hidden);
      act_heap.resize(mlp.hidden);
      pre = pre_heap;
      act = act_heap;
    }
    hidden_activations(mlp, w1_by_input_, x, pre, act);
    for (std::size_t c = 0; c < k; ++c) {
      const double* row = mlp.w2.data() + c * mlp.hidden;
      double sum = mlp.b2[c];
      for (std::size_t j = 0; j < mlp.hidden; ++j) {
        sum += row[j] * act[j];
      }
      out[c] = sum;
    }
  }
}

Label Classifier::predict_flat(std::span<const double> x) const {
  // Small fixed buffer covers every toy configuration without allocating.
  constexpr std::size_t kInline = 16;
  if (num_classes_ <= kInline) {
    double buffer[kInline];
    std::span<double> out(buffer, num_classes_);
    logits_into(x, out);
    return static_cast<Label>(argmax_first(out));
  }
  std::vector<double> out(num_classes_);
  logits_into(x, out);
  return static_cast<Label>(argmax_first(out));
}

std::vector<double> Classifier::logits(const ImageTensor& x) const {
  require_shape(x, input_shape_, "logits");
  std::vector<double> out(num_classes_);
  logits_into(x.values, out);
  return out;
}

Label Classifier::predict(const ImageTensor& x) const {
  require_shape(x, input_shape_, "predict");
  return predict_flat(x.values);
}

ImageTensor Classifier::input_gradient(const ImageTensor& x, Label label) const {
  const auto* mlp = std::get_if<MlpParams>(&params_);
  if (mlp == nullptr) {
    throw UnsupportedOperationError("input_gradient is only available for mlp classifiers, not " +
                                    to_string(kind()));
  }
  require_shape(x, input_shape_, "input_gradient");
  if (label >= num_classes_) {
    throw DomainError("input_gradient: label out of range");
  }
  const std::size_t d = input_shape_.size();
  const std::size_t h = mlp->hidden;
  std::vector<double> pre(h);
  std::vector<double> act(h);
  hidden_activations(*mlp, w1_by_input_, x.values, pre, act);

  std::vector<double> z(num_classes_);
  for (std::size_t c = 0; c < num_classes_; ++c) {
    double sum = mlp->b2[c];
    for (std::size_t j = 0; j < h; ++j) sum += mlp->w2[c * h + j] * act[j];
    z[c] = sum;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double norm = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    norm += v;
  }
  // dL/dz = softmax - onehot
  for (double& v : z) v /= norm;
  z[label] -= 1.0;

  std::vector<double> dpre(h, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    if (pre[j] <= 0.0) continue;
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes_; ++c) sum += mlp->w2[c * h + j] * z[c];
    dpre[j] = sum;
  }
  ImageTensor grad(input_shape_, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    if (dpre[j] == 0.0) continue;
    const double* row = mlp->w1.data() + j * d;
    for (std::size_t i = 0; i < d; ++i) grad.values[i] += row[i] * dpre[j];
  }
  return grad;
}

double cross_entropy(std::span<const double> logits, Label label) {
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double norm = 0.0;
  for (double v : logits) norm += std::exp(v - zmax);
  return std::log(norm) + zmax - logits[label];
}

}  // namespace certdw
