#include "rectidistill/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "rectidistill/error.hpp"
#include "rectidistill/kernels.hpp"
#include "rectidistill/rng.hpp"

namespace rectidistill {

std::vector<std::size_t> MlpParams::dims() const {
  std::vector<std::size_t> out;
  if (layers.empty()) return out;
  out.push_back(layers.front().in);
  for (const auto& layer : layers) out.push_back(layer.out);
  return out;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.weights.size() + layer.bias.size();
  return total;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  out.layers.reserve(layers.size());
  for (const auto& layer : layers) out.layers.emplace_back(layer.in, layer.out);
  return out;
}

void MlpParams::validate() const {
  if (layers.empty()) fail(ErrorCode::invalid_architecture, "network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.in == 0 || layer.out == 0) {
      fail(ErrorCode::invalid_architecture, "layer " + std::to_string(l) + " has a zero width");
    }
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      fail(ErrorCode::invalid_architecture, "layer " + std::to_string(l) + " storage does not match its shape");
    }
    if (l > 0 && layers[l - 1].out != layer.in) {
      fail(ErrorCode::invalid_architecture, "layer " + std::to_string(l) + " does not chain to its predecessor");
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      fail(ErrorCode::invalid_architecture, "layer " + std::to_string(l) + " holds a non-finite value");
    }
  }
}

MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) fail(ErrorCode::invalid_architecture, "need at least an input and an output width");
  for (std::size_t width : dims) {
    if (width == 0) fail(ErrorCode::invalid_architecture, "layer widths must be >= 1");
  }
  Xoshiro256 rng(seed);
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer(dims[l], dims[l + 1]);
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void forward_into(const MlpParams& p, std::span<const double> x, std::span<double> logits) {
  if (x.size() != p.input_width()) {
    fail(ErrorCode::invalid_input, "input has " + std::to_string(x.size()) + " features, model expects " +
                                       std::to_string(p.input_width()));
  }
  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    next.assign(layer.bias.begin(), layer.bias.end());
    for (std::size_t r = 0; r < layer.out; ++r) {
      const double* w = layer.weights.data() + r * layer.in;
      double acc = next[r];
      for (std::size_t c = 0; c < layer.in; ++c) acc += w[c] * current[c];
      next[r] = acc;
    }
    if (l + 1 < p.layers.size()) {
      for (auto& v : next) v = v > 0.0 ? v : 0.0;
    }
    current.swap(next);
  }
  std::copy(current.begin(), current.end(), logits.begin());
}

LogitVector forward(const MlpParams& p, std::span<const double> x) {
  std::vector<double> logits(p.output_width());
  forward_into(p, x, logits);
  return LogitVector(std::move(logits));
}

void accumulate_backward(const MlpParams& p, std::span<const double> x,
                         std::span<const double> upstream, ParamGradients& grads) {
  if (x.size() != p.input_width() || upstream.size() != p.output_width()) {
    fail(ErrorCode::invalid_input, "backward: input or upstream shape mismatch");
  }
  if (grads.layers.size() != p.layers.size()) fail(ErrorCode::invalid_input, "backward: gradient shape mismatch");

  // activations[l] is the input to layer l (post-ReLU for l > 0).
  std::vector<std::vector<double>> activations;
  activations.reserve(p.layers.size());
  activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
    const auto& layer = p.layers[l];
    const auto& input = activations.back();
    std::vector<double> out(layer.bias);
    for (std::size_t r = 0; r < layer.out; ++r) {
      for (std::size_t c = 0; c < layer.in; ++c) out[r] += layer.w(r, c) * input[c];
      out[r] = out[r] > 0.0 ? out[r] : 0.0;
    }
    activations.push_back(std::move(out));
  }

  std::vector<double> delta(upstream.begin(), upstream.end());
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    auto& g = grads.layers[l];
    const auto& input = activations[l];
    for (std::size_t r = 0; r < layer.out; ++r) {
      g.bias[r] += delta[r];
      for (std::size_t c = 0; c < layer.in; ++c) g.w(r, c) += delta[r] * input[c];
    }
    if (l == 0) break;
    std::vector<double> below(layer.in, 0.0);
    for (std::size_t c = 0; c < layer.in; ++c) {
      // input[c] == 0 exactly when the ReLU was inactive (or sat at 0).
      if (input[c] <= 0.0) continue;
      double acc = 0.0;
      for (std::size_t r = 0; r < layer.out; ++r) acc += layer.w(r, c) * delta[r];
      below[c] = acc;
    }
    delta.swap(below);
  }
}

ParamGradients backward(const MlpParams& p, std::span<const double> x, const GradientVector& upstream) {
  ParamGradients grads = p.zeros_like();
  accumulate_backward(p, x, upstream.values, grads);
  return grads;
}

void sgd_step(MlpParams& p, const ParamGradients& grads, MlpParams& velocity, double lr,
              double momentum) {
  if (!std::isfinite(lr) || lr <= 0.0) fail(ErrorCode::invalid_parameter, "learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::invalid_parameter, "momentum must be in [0, 1)");
  if (grads.dims() != p.dims() || velocity.dims() != p.dims()) {
    fail(ErrorCode::invalid_input, "sgd_step: parameter, gradient and velocity shapes differ");
  }
  for (const auto& layer : grads.layers) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      fail(ErrorCode::training_diverged, "non-finite gradient");
    }
  }
  const auto update = [&](std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& vel) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      vel[i] = momentum * vel[i] + grad[i];
      param[i] -= lr * vel[i];
    }
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    update(p.layers[l].weights, grads.layers[l].weights, velocity.layers[l].weights);
    update(p.layers[l].bias, grads.layers[l].bias, velocity.layers[l].bias);
  }
}

EvalResult evaluate(const MlpParams& p, const Dataset& ds) { return kernels::omp::evaluate(p, ds); }

std::uint64_t param_checksum(const MlpParams& p) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto mix = [&hash](const std::vector<double>& values) {
    for (double v : values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof v);
      for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& layer : p.layers) {
    mix(layer.weights);
    mix(layer.bias);
  }
  return hash;
}

}  // namespace rectidistill
