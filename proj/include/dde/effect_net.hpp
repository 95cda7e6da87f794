#pragma once

// Multilayer perceptron producing the effect multiplier Eff in (0, 1) from
// the normalized non-susceptible compartments. Hidden layers use ELU, the
// single output unit uses the logistic sigmoid. Gradients are computed by an
// explicit reverse pass over a cached forward evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dde/compartments.hpp"
#include "dde/errors.hpp"

namespace dde {

/// Fully connected layer; `weights` is outputs x inputs, row-major.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  double& weight(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
  double weight(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }

  bool operator==(const DenseLayer&) const = default;
};

inline double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }
inline double elu_derivative(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

/// Logistic function, kept strictly inside (0, 1) under saturation.
inline double sigmoid(double x) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  if (x >= 0.0) return std::min(hi, 1.0 / (1.0 + std::exp(-x)));
  const double e = std::exp(x);
  return std::max(lo, e / (1.0 + e));
}

class EffectNetwork {
 public:
  EffectNetwork() = default;

  /// Zero-initialized network with the given layer sizes
  /// [inputs, hidden..., 1].
  explicit EffectNetwork(std::vector<std::size_t> layer_sizes, std::uint64_t seed = 0)
      : sizes_(std::move(layer_sizes)), seed_(seed) {
    if (sizes_.size() < 3) throw ConfigError("effect network needs at least one hidden layer");
    if (sizes_.back() != 1) throw ConfigError("effect network must have exactly one output");
    for (std::size_t s : sizes_) {
      if (s == 0) throw ConfigError("layer sizes must be positive");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      DenseLayer layer;
      layer.inputs = sizes_[l];
      layer.outputs = sizes_[l + 1];
      layer.weights.assign(layer.inputs * layer.outputs, 0.0);
      layer.biases.assign(layer.outputs, 0.0);
      layers_.push_back(std::move(layer));
    }
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::uint64_t seed() const { return seed_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
    return n;
  }

  /// Weights then biases, layer by layer.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
  }

  void assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
      throw StructuralError("flat parameter vector does not match network size");
    }
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (double& w : l.weights) w = flat[k++];
      for (double& b : l.biases) b = flat[k++];
    }
  }

  bool operator==(const EffectNetwork&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Layer sizes for a variant: all compartments except S feed the network.
inline std::vector<std::size_t> effect_layer_sizes(Variant v, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{dimension(v) - 1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

/// Weights ~ Normal(0, 0.01^2), every bias 0.5. Deterministic in `seed`.
inline EffectNetwork init_network(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                                  double weight_std = 0.01, double bias = 0.5) {
  EffectNetwork net(layer_sizes, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, weight_std);
  for (auto& layer : net.layers()) {
    for (double& w : layer.weights) w = normal(rng);
    for (double& b : layer.biases) b = bias;
  }
  return net;
}

/// Pre-activations and activations of every layer; activations[0] is the
/// input.
struct ForwardCache {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preactivations;
  double output = 0.0;
};

struct NetworkGradients {
  std::vector<DenseLayer> layers;  // same shapes as the network
  std::vector<double> input_gradient;

  /// Same order as EffectNetwork::flatten.
  std::vector<double> flatten() const {
    std::vector<double> out;
    for (const auto& l : layers) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.biases.begin(), l.biases.end());
    }
    return out;
  }
};

inline NetworkGradients zero_gradients(const EffectNetwork& net) {
  NetworkGradients g;
  for (const auto& l : net.layers()) {
    DenseLayer z;
    z.inputs = l.inputs;
    z.outputs = l.outputs;
    z.weights.assign(l.weights.size(), 0.0);
    z.biases.assign(l.biases.size(), 0.0);
    g.layers.push_back(std::move(z));
  }
  g.input_gradient.assign(net.input_size(), 0.0);
  return g;
}

/// Evaluates the network, filling `cache`. Returns Eff in (0, 1).
inline double forward(const EffectNetwork& net, std::span<const double> input, ForwardCache& cache) {
  if (input.size() != net.input_size()) {
    throw StructuralError("network expects " + std::to_string(net.input_size()) +
                          " inputs, got " + std::to_string(input.size()));
  }
  for (double x : input) {
    if (!std::isfinite(x)) throw NumericError("non-finite effect network input");
  }
  const auto& layers = net.layers();
  cache.activations.resize(layers.size() + 1);
  cache.preactivations.resize(layers.size());
  cache.activations[0].assign(input.begin(), input.end());

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    const auto& in = cache.activations[l];
    auto& pre = cache.preactivations[l];
    auto& out = cache.activations[l + 1];
    pre.resize(layer.outputs);
    out.resize(layer.outputs);
    const bool last = l + 1 == layers.size();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      double acc = layer.biases[o];
      const double* w = &layer.weights[o * layer.inputs];
      for (std::size_t i = 0; i < layer.inputs; ++i) acc += w[i] * in[i];
      pre[o] = acc;
      out[o] = last ? sigmoid(acc) : elu(acc);
    }
  }
  cache.output = cache.activations.back()[0];
  return cache.output;
}

struct ForwardResult {
  double value;
  ForwardCache cache;
};

inline ForwardResult forward(const EffectNetwork& net, std::span<const double> input) {
  ForwardResult r{0.0, {}};
  r.value = forward(net, input, r.cache);
  return r;
}

/// Accumulates upstream * dEff/d(parameters, input) into `grads`.
inline void backward_accumulate(const EffectNetwork& net, const ForwardCache& cache,
                                double upstream, NetworkGradients& grads) {
  const auto& layers = net.layers();
  if (cache.activations.size() != layers.size() + 1 || grads.layers.size() != layers.size() ||
      cache.activations[0].size() != net.input_size()) {
    throw StructuralError("forward cache does not match the network");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (cache.preactivations[l].size() != layers[l].outputs) {
      throw StructuralError("forward cache does not match the network");
    }
  }
  if (upstream == 0.0) return;

  // delta = dL/d(preactivation) of the current layer
  const double y = cache.output;
  std::vector<double> delta{upstream * y * (1.0 - y)};
  std::vector<double> below;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    DenseLayer& g = grads.layers[l];
    const auto& in = cache.activations[l];
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      g.biases[o] += delta[o];
      double* gw = &g.weights[o * layer.inputs];
      for (std::size_t i = 0; i < layer.inputs; ++i) gw[i] += delta[o] * in[i];
    }
    below.assign(layer.inputs, 0.0);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double* w = &layer.weights[o * layer.inputs];
      for (std::size_t i = 0; i < layer.inputs; ++i) below[i] += w[i] * delta[o];
    }
    if (l == 0) {
      for (std::size_t i = 0; i < below.size(); ++i) grads.input_gradient[i] += below[i];
    } else {
      const auto& pre = cache.preactivations[l - 1];
      for (std::size_t i = 0; i < below.size(); ++i) below[i] *= elu_derivative(pre[i]);
    }
    delta.swap(below);
  }
}

inline NetworkGradients backward(const EffectNetwork& net, const ForwardCache& cache,
                                 double upstream) {
  NetworkGradients g = zero_gradients(net);
  backward_accumulate(net, cache, upstream, g);
  return g;
}

/// Network input for a state: every compartment except S, divided by N.
inline void network_input(std::span<const double> state, double population,
                          std::vector<double>& out) {
  out.resize(state.size() - 1);
  const double inv_n = 1.0 / population;
  for (std::size_t i = 1; i < state.size(); ++i) out[i - 1] = state[i] * inv_n;
}

/// beta_eff(Z) = beta* * Eff(Z / N), usable as an integrator beta provider.
class NetworkBeta {
 public:
  NetworkBeta(const EffectNetwork& net, double beta_star, double population)
      : net_(&net), beta_star_(beta_star), population_(population) {}

  double effect(std::span<const double> state) const {
    network_input(state, population_, input_);
    return forward(*net_, input_, cache_);
  }

  double operator()(std::span<const double> state) const { return beta_star_ * effect(state); }

 private:
  const EffectNetwork* net_;
  double beta_star_;
  double population_;
  mutable std::vector<double> input_;
  mutable ForwardCache cache_;
};

}  // namespace dde
