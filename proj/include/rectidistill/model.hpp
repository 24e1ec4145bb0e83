#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "rectidistill/data.hpp"
#include "rectidistill/numerics.hpp"

namespace rectidistill {

/// Fully connected layer, weights row-major (out x in).
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_width, std::size_t out_width)
      : in(in_width), out(out_width), weights(in_width * out_width, 0.0), bias(out_width, 0.0) {}

  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// ReLU on hidden layers, identity on the output layer (logits).
/// Gradients and momentum buffers share this shape.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::vector<std::size_t> dims() const;
  std::size_t input_width() const { return layers.front().in; }
  std::size_t output_width() const { return layers.back().out; }
  std::size_t parameter_count() const;

  /// Zero-filled parameters with the same shape.
  MlpParams zeros_like() const;

  /// Throws invalid_architecture on broken chaining or non-finite values.
  void validate() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

using ParamGradients = MlpParams;

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpParams init_mlp(std::span<const std::size_t> dims, std::uint64_t seed);

LogitVector forward(const MlpParams& p, std::span<const double> x);

/// Raw logits without the LogitVector finiteness check; used by the batch
/// kernels that write into preallocated rows.
void forward_into(const MlpParams& p, std::span<const double> x, std::span<double> logits);

/// Reverse-mode gradients of <upstream, logits(x)> w.r.t. every parameter.
/// The ReLU derivative at 0 is taken as 0.
ParamGradients backward(const MlpParams& p, std::span<const double> x, const GradientVector& upstream);

/// Adds the gradients of one sample into grads.
void accumulate_backward(const MlpParams& p, std::span<const double> x,
                         std::span<const double> upstream, ParamGradients& grads);

/// v <- momentum * v + g; p <- p - lr * v.
/// Throws training_diverged on a non-finite gradient, before touching p.
void sgd_step(MlpParams& p, const ParamGradients& grads, MlpParams& velocity, double lr,
              double momentum);

struct EvalResult {
  double accuracy = 0.0;
  double mean_ce = 0.0;
};

/// Top-1 accuracy (lowest-index ties) and mean CE at tau = 1.
EvalResult evaluate(const MlpParams& p, const Dataset& ds);

/// FNV-1a over the raw parameter bytes.
std::uint64_t param_checksum(const MlpParams& p);

/// Text checkpoint; see docs in README for the layout.
void write_checkpoint(const MlpParams& p, std::ostream& out);
MlpParams read_checkpoint(std::istream& in);
void save_checkpoint(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace rectidistill
