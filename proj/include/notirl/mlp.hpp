#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "notirl/errors.hpp"
#include "notirl/matrix.hpp"
#include "notirl/rng.hpp"

namespace notirl {

enum class Activation { ReLU, Tanh };

inline const char* to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "tanh";
}

// Fully connected network. weights[i] has shape (layer_dims[i],
// layer_dims[i+1]); hidden layers apply `activation`, the output layer is
// linear. Biases start at zero, weights at He-uniform (ReLU) or
// Xavier-uniform (Tanh).
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
  Activation activation = Activation::ReLU;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t n_layers() const { return weights.size(); }
};

struct MlpGrads {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;
};

inline MlpParams make_mlp(const std::vector<std::size_t>& layer_dims,
                          Activation activation, Rng& rng) {
  if (layer_dims.size() < 2)
    throw ConfigError("make_mlp: need at least input and output dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw ConfigError("make_mlp: zero-width layer");

  MlpParams p;
  p.layer_dims = layer_dims;
  p.activation = activation;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const std::size_t fan_in = layer_dims[i];
    const std::size_t fan_out = layer_dims[i + 1];
    const double limit =
        activation == Activation::ReLU
            ? std::sqrt(6.0 / static_cast<double>(fan_in))
            : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseMatrix w(fan_in, fan_out);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

inline MlpGrads zero_grads_like(const MlpParams& p) {
  MlpGrads g;
  for (std::size_t i = 0; i < p.n_layers(); ++i) {
    g.weights.emplace_back(p.weights[i].rows, p.weights[i].cols);
    g.biases.emplace_back(p.biases[i].size(), 0.0);
  }
  return g;
}

namespace detail {

inline double activate(double z, Activation a) {
  if (a == Activation::ReLU) return z > 0.0 ? z : 0.0;
  return std::tanh(z);
}

// Derivative expressed through the post-activation value, which is all the
// backward pass keeps around.
inline double activate_grad_from_output(double out, Activation a) {
  if (a == Activation::ReLU) return out > 0.0 ? 1.0 : 0.0;
  return 1.0 - out * out;
}

// Returns activations a_0..a_L (a_0 = inputs, a_L = network output).
inline std::vector<DenseMatrix> forward_trace(const MlpParams& p,
                                              const DenseMatrix& inputs) {
  if (inputs.cols != p.input_dim())
    throw DataError("mlp: input has " + std::to_string(inputs.cols) +
                    " columns, network expects " +
                    std::to_string(p.input_dim()));
  std::vector<DenseMatrix> acts;
  acts.reserve(p.n_layers() + 1);
  acts.push_back(inputs);
  for (std::size_t layer = 0; layer < p.n_layers(); ++layer) {
    const DenseMatrix& x = acts.back();
    const DenseMatrix& w = p.weights[layer];
    const std::vector<double>& b = p.biases[layer];
    DenseMatrix out(x.rows, w.cols);
    const bool last = layer + 1 == p.n_layers();
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < w.cols; ++c) {
        double z = b[c];
        for (std::size_t k = 0; k < w.rows; ++k)
          z += x.at(r, k) * w.at(k, c);
        out.at(r, c) = last ? z : activate(z, p.activation);
      }
    }
    acts.push_back(std::move(out));
  }
  return acts;
}

}  // namespace detail

inline DenseMatrix mlp_forward(const MlpParams& p, const DenseMatrix& inputs) {
  DenseMatrix out = detail::forward_trace(p, inputs).back();
  if (!all_finite(out.data))
    throw NumericError("mlp_forward: non-finite output");
  return out;
}

// Backpropagation. output_grads holds dL/dy per row; the returned gradients
// are summed over rows, so pass 1/m-scaled upstream grads for a mean loss.
inline MlpGrads mlp_backward(const MlpParams& p, const DenseMatrix& inputs,
                             const DenseMatrix& output_grads) {
  std::vector<DenseMatrix> acts = detail::forward_trace(p, inputs);
  if (output_grads.rows != inputs.rows ||
      output_grads.cols != p.output_dim())
    throw DataError("mlp_backward: output_grads shape mismatch");

  MlpGrads grads = zero_grads_like(p);
  DenseMatrix delta = output_grads;  // dL/dz for the layer being processed
  for (std::size_t layer = p.n_layers(); layer-- > 0;) {
    const DenseMatrix& a_in = acts[layer];
    const DenseMatrix& a_out = acts[layer + 1];
    const bool last = layer + 1 == p.n_layers();
    if (!last) {
      for (std::size_t r = 0; r < delta.rows; ++r)
        for (std::size_t c = 0; c < delta.cols; ++c)
          delta.at(r, c) *= detail::activate_grad_from_output(
              a_out.at(r, c), p.activation);
    }
    DenseMatrix& gw = grads.weights[layer];
    std::vector<double>& gb = grads.biases[layer];
    for (std::size_t r = 0; r < delta.rows; ++r) {
      for (std::size_t c = 0; c < delta.cols; ++c) {
        const double d = delta.at(r, c);
        gb[c] += d;
        for (std::size_t k = 0; k < a_in.cols; ++k)
          gw.at(k, c) += a_in.at(r, k) * d;
      }
    }
    if (layer > 0) {
      const DenseMatrix& w = p.weights[layer];
      DenseMatrix prev(delta.rows, w.rows);
      for (std::size_t r = 0; r < delta.rows; ++r)
        for (std::size_t k = 0; k < w.rows; ++k) {
          double s = 0.0;
          for (std::size_t c = 0; c < w.cols; ++c)
            s += delta.at(r, c) * w.at(k, c);
          prev.at(r, k) = s;
        }
      delta = std::move(prev);
    }
  }
  return grads;
}

enum class OptKind { Sgd, SgdMomentum };

struct OptState {
  OptKind kind = OptKind::Sgd;
  double learning_rate = 0.01;
  double momentum = 0.0;
  MlpGrads velocity;  // mirrors parameter shapes exactly
};

inline OptState make_opt_state(const MlpParams& p, OptKind kind,
                               double learning_rate, double momentum = 0.0) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("optimizer: learning_rate must be finite and >= 0");
  if (kind == OptKind::SgdMomentum && (!(momentum >= 0.0) || momentum >= 1.0))
    throw ConfigError("optimizer: momentum must lie in [0, 1)");
  OptState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  s.momentum = kind == OptKind::SgdMomentum ? momentum : 0.0;
  s.velocity = zero_grads_like(p);
  return s;
}

// SGD update, optionally with classical momentum: v <- mu*v + g,
// theta <- theta - lr*v. Plain SGD is the mu = 0 special case.
inline void opt_step(MlpParams& p, const MlpGrads& grads, OptState& state) {
  if (grads.weights.size() != p.n_layers() ||
      state.velocity.weights.size() != p.n_layers())
    throw DataError("opt_step: layer count mismatch");
  for (std::size_t i = 0; i < p.n_layers(); ++i) {
    if (!p.weights[i].same_shape(grads.weights[i]) ||
        p.biases[i].size() != grads.biases[i].size())
      throw DataError("opt_step: gradient shape mismatch at layer " +
                      std::to_string(i));
    if (!all_finite(grads.weights[i].data) || !all_finite(grads.biases[i]))
      throw NumericError("opt_step: non-finite gradient at layer " +
                         std::to_string(i));
    const double lr = state.learning_rate;
    const double mu = state.momentum;
    DenseMatrix& vw = state.velocity.weights[i];
    std::vector<double>& vb = state.velocity.biases[i];
    for (std::size_t j = 0; j < vw.data.size(); ++j) {
      vw.data[j] = mu * vw.data[j] + grads.weights[i].data[j];
      p.weights[i].data[j] -= lr * vw.data[j];
    }
    for (std::size_t j = 0; j < vb.size(); ++j) {
      vb[j] = mu * vb[j] + grads.biases[i][j];
      p.biases[i][j] -= lr * vb[j];
    }
  }
}

// Canonical flattening order used by checkpoints and finite-difference
// probes: layers in order, each weight matrix row-major, then its bias.
inline std::size_t param_count(const MlpParams& p) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.n_layers(); ++i)
    n += p.weights[i].data.size() + p.biases[i].size();
  return n;
}

inline std::vector<double> flatten_params(const MlpParams& p) {
  std::vector<double> flat;
  flat.reserve(param_count(p));
  for (std::size_t i = 0; i < p.n_layers(); ++i) {
    flat.insert(flat.end(), p.weights[i].data.begin(), p.weights[i].data.end());
    flat.insert(flat.end(), p.biases[i].begin(), p.biases[i].end());
  }
  return flat;
}

inline void unflatten_params(MlpParams& p, std::span<const double> flat) {
  if (flat.size() != param_count(p))
    throw DataError("unflatten_params: length mismatch");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < p.n_layers(); ++i) {
    for (double& v : p.weights[i].data) v = flat[pos++];
    for (double& v : p.biases[i]) v = flat[pos++];
  }
}

}  // namespace notirl
