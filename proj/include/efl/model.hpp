#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "efl/error.hpp"
#include "efl/matrix.hpp"
#include "efl/rng.hpp"

namespace efl {

// Flat parameter vector of a fully connected ReLU network.
//
// Layer l maps layer_sizes[l] -> layer_sizes[l+1]. Its block in `values` is
// the fan_out x fan_in weight matrix (row-major, row o holds the weights of
// output unit o) followed by fan_out biases.
struct ModelParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<double> values;

  std::size_t total_dim() const noexcept { return values.size(); }
  std::size_t num_layers() const noexcept { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  // Width of the layer feeding the output layer.
  std::size_t penultimate_dim() const { return layer_sizes[layer_sizes.size() - 2]; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Batch {
  Matrix features;          // batch x input_dim
  std::vector<int> labels;  // one per row
};

enum class ActivationLayer { penultimate, final };

inline std::size_t mlp_dim(std::span<const std::size_t> layer_sizes) {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    d += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return d;
}

namespace detail {

inline std::size_t layer_offset(const ModelParams& p, std::size_t layer) {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l)
    off += p.layer_sizes[l] * p.layer_sizes[l + 1] + p.layer_sizes[l + 1];
  return off;
}

// out = in * W^T + b for one layer (rows of `in` are samples).
inline Matrix affine(const Matrix& in, const double* w, const double* b, std::size_t fan_in,
                     std::size_t fan_out) {
  Matrix out(in.rows(), fan_out);
  for (std::size_t s = 0; s < in.rows(); ++s) {
    auto x = in.row(s);
    auto y = out.row(s);
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double* wo = w + o * fan_in;
      double acc = b[o];
      for (std::size_t i = 0; i < fan_in; ++i) acc += wo[i] * x[i];
      y[o] = acc;
    }
  }
  return out;
}

inline void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

inline void check_params(const ModelParams& p) {
  require(p.layer_sizes.size() >= 2, "model: need at least 2 layer sizes");
  require(p.values.size() == mlp_dim(p.layer_sizes), "model: parameter vector length ",
          p.values.size(), " != ", mlp_dim(p.layer_sizes));
}

inline void check_batch(const ModelParams& p, const Batch& batch) {
  check_params(p);
  require(batch.features.cols() == p.input_dim(), "model: batch has ", batch.features.cols(),
          " features, network expects ", p.input_dim());
  require(batch.features.rows() == batch.labels.size(), "model: ", batch.features.rows(),
          " feature rows but ", batch.labels.size(), " labels");
}

}  // namespace detail

// Glorot-uniform weights, zero biases.
inline ModelParams init_mlp(std::vector<std::size_t> layer_sizes, Rng& rng) {
  detail::require(layer_sizes.size() >= 2, "init_mlp: need at least 2 layer sizes, got ",
                  layer_sizes.size());
  for (std::size_t s : layer_sizes) detail::require(s >= 1, "init_mlp: layer size must be >= 1");
  ModelParams p{std::move(layer_sizes), {}};
  p.values.assign(mlp_dim(p.layer_sizes), 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const std::size_t fan_in = p.layer_sizes[l];
    const std::size_t fan_out = p.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) p.values[off + k] = dist(rng);
    off += fan_in * fan_out + fan_out;
  }
  return p;
}

inline ModelParams zero_mlp(std::vector<std::size_t> layer_sizes) {
  detail::require(layer_sizes.size() >= 2, "zero_mlp: need at least 2 layer sizes");
  ModelParams p{std::move(layer_sizes), {}};
  p.values.assign(mlp_dim(p.layer_sizes), 0.0);
  return p;
}

struct ForwardResult {
  Matrix logits;  // batch x classes
  Matrix penult;  // batch x penultimate width (input features when there is no hidden layer)
};

inline ForwardResult forward(const ModelParams& params, const Matrix& features) {
  detail::check_params(params);
  detail::require(features.cols() == params.input_dim(), "forward: input has ", features.cols(),
                  " features, network expects ", params.input_dim());
  Matrix h = features;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const std::size_t fan_in = params.layer_sizes[l];
    const std::size_t fan_out = params.layer_sizes[l + 1];
    const double* w = params.values.data() + detail::layer_offset(params, l);
    Matrix z = detail::affine(h, w, w + fan_in * fan_out, fan_in, fan_out);
    if (l + 1 == params.num_layers()) return {std::move(z), std::move(h)};
    detail::relu_inplace(z);
    h = std::move(z);
  }
  return {};  // unreachable: num_layers() >= 1
}

inline ForwardResult forward(const ModelParams& params, const Batch& batch) {
  return forward(params, batch.features);
}

inline std::vector<double> log_softmax(std::span<const double> v) {
  detail::require(!v.empty(), "log_softmax: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  const double lse = std::log(s);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - m - lse;
  return out;
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean cross-entropy over the batch and its gradient w.r.t. every parameter.
inline LossGrad loss_and_grad(const ModelParams& params, const Batch& batch) {
  detail::check_batch(params, batch);
  const std::size_t n = batch.features.rows();
  detail::require(n > 0, "loss_and_grad: empty batch");
  const std::size_t classes = params.num_classes();
  for (int y : batch.labels)
    detail::require(y >= 0 && static_cast<std::size_t>(y) < classes, "loss_and_grad: label ", y,
                    " outside [0, ", classes, ")");

  // Forward, keeping every layer's input (post-ReLU activations).
  const std::size_t layers = params.num_layers();
  std::vector<Matrix> inputs;
  inputs.reserve(layers);
  inputs.push_back(batch.features);
  Matrix logits;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = params.layer_sizes[l];
    const std::size_t fan_out = params.layer_sizes[l + 1];
    const double* w = params.values.data() + detail::layer_offset(params, l);
    Matrix z = detail::affine(inputs.back(), w, w + fan_in * fan_out, fan_in, fan_out);
    if (l + 1 == layers) {
      logits = std::move(z);
    } else {
      detail::relu_inplace(z);
      inputs.push_back(std::move(z));
    }
  }

  LossGrad out;
  out.grad.assign(params.total_dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  // delta = d(loss)/d(z) for the current layer, starting at the logits.
  Matrix delta(n, classes);
  for (std::size_t s = 0; s < n; ++s) {
    auto lp = log_softmax(logits.row(s));
    const auto y = static_cast<std::size_t>(batch.labels[s]);
    out.loss -= lp[y];
    auto d = delta.row(s);
    for (std::size_t c = 0; c < classes; ++c) d[c] = std::exp(lp[c]) * inv_n;
    d[y] -= inv_n;
  }
  out.loss *= inv_n;

  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t fan_in = params.layer_sizes[l];
    const std::size_t fan_out = params.layer_sizes[l + 1];
    const std::size_t off = detail::layer_offset(params, l);
    const double* w = params.values.data() + off;
    double* gw = out.grad.data() + off;
    double* gb = gw + fan_in * fan_out;
    const Matrix& in = inputs[l];
    for (std::size_t s = 0; s < n; ++s) {
      auto d = delta.row(s);
      auto x = in.row(s);
      for (std::size_t o = 0; o < fan_out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        double* gwo = gw + o * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) gwo[i] += dv * x[i];
        gb[o] += dv;
      }
    }
    if (l == 0) break;
    Matrix prev(n, fan_in);
    for (std::size_t s = 0; s < n; ++s) {
      auto d = delta.row(s);
      auto x = in.row(s);
      auto p = prev.row(s);
      for (std::size_t o = 0; o < fan_out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        const double* wo = w + o * fan_in;
        for (std::size_t i = 0; i < fan_in; ++i) p[i] += dv * wo[i];
      }
      // ReLU derivative: x is the post-ReLU output of layer l-1.
      for (std::size_t i = 0; i < fan_in; ++i)
        if (x[i] <= 0.0) p[i] = 0.0;
    }
    delta = std::move(prev);
  }
  return out;
}

// Mean cross-entropy only; cheaper than loss_and_grad for evaluation.
inline double mean_loss(const ModelParams& params, const Batch& batch) {
  detail::check_batch(params, batch);
  detail::require(!batch.labels.empty(), "mean_loss: empty batch");
  const auto fwd = forward(params, batch.features);
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.labels.size(); ++s) {
    const auto y = batch.labels[s];
    detail::require(y >= 0 && static_cast<std::size_t>(y) < params.num_classes(),
                    "mean_loss: label ", y, " out of range");
    loss -= log_softmax(fwd.logits.row(s))[static_cast<std::size_t>(y)];
  }
  return loss / static_cast<double>(batch.labels.size());
}

// Argmax class per row; ties go to the lowest class index.
inline std::vector<int> predict(const ModelParams& params, const Matrix& features) {
  const auto fwd = forward(params, features);
  std::vector<int> out(features.rows());
  for (std::size_t s = 0; s < features.rows(); ++s) {
    auto r = fwd.logits.row(s);
    out[s] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

// Activation fingerprint of a client: the per-sample log-softmax of the
// chosen layer's output, averaged over the probe rows and renormalized so
// the result is again a log-probability vector (the normalized geometric
// mean of the per-sample distributions). For a single probe row this is
// exactly that row's log-softmax.
inline std::vector<double> activation_vector(const ModelParams& params, const Matrix& probe,
                                             ActivationLayer layer = ActivationLayer::penultimate) {
  detail::require(probe.rows() > 0, "activation_vector: empty probe");
  const auto fwd = forward(params, probe);
  const Matrix& src = layer == ActivationLayer::penultimate ? fwd.penult : fwd.logits;
  std::vector<double> acc(src.cols(), 0.0);
  for (std::size_t s = 0; s < src.rows(); ++s) {
    const auto lp = log_softmax(src.row(s));
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += lp[j];
  }
  const double inv = 1.0 / static_cast<double>(src.rows());
  for (double& v : acc) v *= inv;
  if (src.rows() == 1) return acc;
  return log_softmax(acc);
}

}  // namespace efl
