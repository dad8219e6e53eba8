#include "certdw/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "certdw/error.hpp"

namespace certdw {
namespace {

// y += a * x
inline __attribute__((always_inline)) void axpy(double* __restrict y, const double* __restrict x, double a,
                                                std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// The batch kernels below are element-wise sums in a fixed order, so the
// wide and default clones produce identical results.

// Y(batch x out) += X(batch x in) * WT(in x out)
__attribute__((target_clones("avx2", "default"))) void batch_matmul_add(const double* x, const double* wt,
                                                                         std::size_t batch, std::size_t in,
                                                                         std::size_t out, double* y) {
  for (std::size_t i = 0; i < in; ++i) {
    const double* col = wt + i * out;
    for (std::size_t s = 0; s < batch; ++s) axpy(y + s * out, col, x[s * in + i], out);
  }
}

// GT(in x out) = X^T(in x batch) * DY(batch x out)
__attribute__((target_clones("avx2", "default"))) void batch_outer_sum(const double* x, const double* dy,
                                                                        std::size_t batch, std::size_t in,
                                                                        std::size_t out, double* gt) {
  for (std::size_t i = 0; i < in; ++i) {
    double* gcol = gt + i * out;
    std::fill(gcol, gcol + out, 0.0);
    for (std::size_t s = 0; s < batch; ++s) axpy(gcol, dy + s * out, x[s * in + i], out);
  }
}

// Dense layer Y = X W^T + b over a batch. Weights are kept transposed
// (in x out) so every inner loop runs over contiguous output units; X and Y
// are row-major (batch x in / batch x out).
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> wt;
  std::vector<double> b;
  std::vector<double> gwt;
  std::vector<double> gb;

  // Initial weights are drawn in row-major (out x in) order.
  Dense(std::size_t in_dim, std::size_t out_dim, double init_std, SeededStream::Engine& engine)
      : in(in_dim), out(out_dim), wt(in_dim * out_dim), b(out_dim, 0.0), gwt(in_dim * out_dim), gb(out_dim) {
    std::normal_distribution<double> normal(0.0, init_std);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = normal(engine);
    }
  }

  std::vector<double> weight_rows() const {
    std::vector<double> w(in * out);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) w[o * in + i] = wt[i * out + o];
    }
    return w;
  }

  void forward(const double* x, std::size_t batch, double* y) const {
    for (std::size_t s = 0; s < batch; ++s) std::copy(b.begin(), b.end(), y + s * out);
    batch_matmul_add(x, wt.data(), batch, in, out, y);
  }

  // Overwrites parameter gradients; writes dL/dX when dx is non-null.
  void backward(const double* x, const double* dy, std::size_t batch, double* dx) {
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t o = 0; o < out; ++o) gb[o] += dy[s * out + o];
    }
    batch_outer_sum(x, dy, batch, in, out, gwt.data());
    if (dx != nullptr) {
      for (std::size_t s = 0; s < batch; ++s) {
        const double* dys = dy + s * out;
        for (std::size_t i = 0; i < in; ++i) {
          const double* col = wt.data() + i * out;
          double sum = 0.0;
          for (std::size_t o = 0; o < out; ++o) sum += col[o] * dys[o];
          dx[s * in + i] = sum;
        }
      }
    }
  }

  void step(double scale) {
    for (std::size_t i = 0; i < wt.size(); ++i) wt[i] -= scale * gwt[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= scale * gb[i];
  }
};

// Converts logits in place to dL/dz = softmax - onehot; returns the loss.
double softmax_ce_grad(double* z, std::size_t k, Label label) {
  const double zmax = *std::max_element(z, z + k);
  double norm = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    z[j] = std::exp(z[j] - zmax);
    norm += z[j];
  }
  for (std::size_t j = 0; j < k; ++j) z[j] /= norm;
  const double loss = -std::log(std::max(z[label], 1e-300));
  z[label] -= 1.0;
  return loss;
}

}  // namespace

std::string to_string(Architecture arch) { return arch == Architecture::kLogistic ? "logistic" : "mlp"; }

Architecture architecture_from_string(const std::string& name) {
  if (name == "logistic") return Architecture::kLogistic;
  if (name == "mlp") return Architecture::kMlp;
  throw DomainError("unknown architecture '" + name + "'");
}

Classifier train_model(const LabeledDataset& train, const TrainConfig& config, const SeededStream& stream) {
  if (train.empty()) throw DomainError("train_model: empty training set");
  train.validate();
  if (config.batch_size == 0) throw DomainError("train_model: batch size must be positive");
  if (config.arch == Architecture::kMlp && config.hidden == 0) throw DomainError("train_model: hidden width is zero");
  if (!(config.learning_rate > 0.0)) throw DomainError("train_model: learning rate must be positive");

  const std::size_t d = train.shape.size();
  const std::size_t k = train.num_classes;
  const bool mlp = config.arch == Architecture::kMlp;
  auto engine = stream.engine();

  std::vector<Dense> layers;
  if (mlp) {
    layers.emplace_back(d, config.hidden, std::sqrt(2.0 / static_cast<double>(d)), engine);
    layers.emplace_back(config.hidden, k, std::sqrt(1.0 / static_cast<double>(config.hidden)), engine);
  } else {
    layers.emplace_back(d, k, std::sqrt(1.0 / static_cast<double>(d)), engine);
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t h = config.hidden;
  const std::size_t max_batch = std::min(config.batch_size, train.size());
  std::vector<double> xb(max_batch * d), hidden_pre(max_batch * h), hidden(max_batch * h), dhidden(max_batch * h);
  std::vector<double> z(max_batch * k);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(engine)]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::size_t n = stop - start;
      for (std::size_t s = 0; s < n; ++s) {
        const auto& x = train.images[order[start + s]].values;
        std::copy(x.begin(), x.end(), xb.begin() + static_cast<std::ptrdiff_t>(s * d));
      }
      double batch_loss = 0.0;
      if (mlp) {
        layers[0].forward(xb.data(), n, hidden_pre.data());
        for (std::size_t j = 0; j < n * h; ++j) hidden[j] = std::max(0.0, hidden_pre[j]);
        layers[1].forward(hidden.data(), n, z.data());
      } else {
        layers[0].forward(xb.data(), n, z.data());
      }
      for (std::size_t s = 0; s < n; ++s) batch_loss += softmax_ce_grad(z.data() + s * k, k, train.labels[order[start + s]]);
      if (mlp) {
        layers[1].backward(hidden.data(), z.data(), n, dhidden.data());
        for (std::size_t j = 0; j < n * h; ++j) {
          if (hidden_pre[j] <= 0.0) dhidden[j] = 0.0;
        }
        layers[0].backward(xb.data(), dhidden.data(), n, nullptr);
      } else {
        layers[0].backward(xb.data(), z.data(), n, nullptr);
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainingFailureError("train_model: loss diverged in epoch " + std::to_string(epoch));
      }
      const double scale = config.learning_rate / static_cast<double>(stop - start);
      for (auto& layer : layers) layer.step(scale);
    }
  }

  for (const auto& layer : layers) {
    for (double v : layer.wt) {
      if (!std::isfinite(v)) throw TrainingFailureError("train_model: parameters became non-finite");
    }
  }
  if (mlp) {
    MlpParams params{config.hidden, layers[0].weight_rows(), std::move(layers[0].b), layers[1].weight_rows(),
                     std::move(layers[1].b)};
    return Classifier::mlp(train.shape, k, std::move(params));
  }
  return Classifier::linear(train.shape, k, LinearParams{layers[0].weight_rows(), std::move(layers[0].b)});
}

double evaluate_ba(const Classifier& model, const LabeledDataset& test) {
  if (test.empty()) throw DomainError("evaluate_ba: empty test set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (model.predict(test.images[i]) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double evaluate_wsr(const Classifier& model, const LabeledDataset& test, const TriggerSpec& trigger) {
  if (test.empty()) throw DomainError("evaluate_wsr: empty test set");
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test.labels[i] == trigger.target_label) continue;
    ++total;
    if (model.predict(apply_trigger(test.images[i], trigger, true)) == trigger.target_label) ++hits;
  }
  if (total == 0) throw DomainError("evaluate_wsr: every test sample already carries the target label");
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace certdw
