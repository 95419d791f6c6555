#pragma once

// Minimal dense network engine: ReLU hidden layers, linear or 0.5 tanh + 0.5
// output, exact reverse-mode gradients, SGD and soft target updates.

#include <cstdint>
#include <span>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/rng.hpp"

namespace schedlab {

enum class OutputMap : std::uint8_t {
  kLinear,
  kHalfTanh,  // 0.5 tanh(z) + 0.5, lands in (0,1)
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> biases;   // out

  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  OutputMap output = OutputMap::kLinear;
  std::uint64_t version = 0;

  /// All-zero parameters with the given layer widths (input first).
  static MlpParams zeros(std::span<const int> dims, OutputMap output);
  /// Uniform(+-1/sqrt(fan_in)) weights and biases.
  static MlpParams random(std::span<const int> dims, OutputMap output, Rng& rng);

  std::vector<int> dims() const;
  int input_size() const { return layers.front().in; }
  int output_size() const { return layers.back().out; }
  std::size_t parameter_count() const;
  bool all_finite() const;
  void set_zero();

  /// Visits every parameter, layer by layer, weights before biases.
  template <class Fn>
  void for_each(Fn&& fn) {
    for (auto& l : layers) {
      for (double& w : l.weights) fn(w);
      for (double& b : l.biases) fn(b);
    }
  }

  bool operator==(const MlpParams&) const = default;
};

/// Per-layer values kept from a forward pass for backpropagation.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input seen by each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
  std::vector<double> output;
};

/// Throws std::invalid_argument on an input-size mismatch.
std::vector<double> forward(const MlpParams& net, std::span<const double> input);
const std::vector<double>& forward(const MlpParams& net, std::span<const double> input,
                                   ForwardCache& cache);

/// Adds d(upstream . output)/d(params) into `grads` (same shape as `net`) and
/// returns the gradient with respect to the input.
std::vector<double> backward(const MlpParams& net, const ForwardCache& cache,
                             std::span<const double> upstream, MlpParams& grads);
/// Gradient with respect to the input only; parameters are left alone.
std::vector<double> input_gradient(const MlpParams& net, const ForwardCache& cache,
                                   std::span<const double> upstream);

/// Elementwise a += scale * b over matching shapes.
void axpy(MlpParams& a, const MlpParams& b, double scale);

void sgd_step(MlpParams& params, const MlpParams& grads, double lr);

/// target <- (1 - tau) target + tau source
void soft_update(MlpParams& target, const MlpParams& source, double tau);

/// Plain SGD by default; heavy-ball momentum when configured.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double momentum = 0.9)
      : kind_(kind), lr_(lr), momentum_(momentum) {}
  void step(MlpParams& params, const MlpParams& grads);
  double learning_rate() const { return lr_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  MlpParams velocity_;
};

/// Parameter payload: version u64, layer count u32, widths u32 each, then per
/// layer row-major f64 weights followed by f64 biases, all little-endian.
std::vector<std::uint8_t> serialize(const MlpParams& net);
/// Throws DecodeError on malformed or truncated payloads.
MlpParams deserialize(std::span<const std::uint8_t> bytes, OutputMap output);

}  // namespace schedlab
