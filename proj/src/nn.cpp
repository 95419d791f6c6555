#include "schedlab/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "schedlab/bytes.hpp"

namespace schedlab {

namespace {

void check_dims(std::span<const int> dims) {
  if (dims.size() < 2) throw std::invalid_argument("MlpParams: need at least input and output widths");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("MlpParams: layer widths must be positive");
}

void check_same_shape(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size())
    throw std::invalid_argument("MlpParams: layer count mismatch");
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].in != b.layers[i].in || a.layers[i].out != b.layers[i].out)
      throw std::invalid_argument("MlpParams: layer shape mismatch");
}

// Guards the decoder against absurd allocations from corrupt headers.
constexpr std::uint32_t kMaxLayers = 64;
constexpr std::uint32_t kMaxWidth = 1u << 20;

}  // namespace

MlpParams MlpParams::zeros(std::span<const int> dims, OutputMap output) {
  check_dims(dims);
  MlpParams p;
  p.output = output;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.in = dims[i];
    l.out = dims[i + 1];
    l.weights.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
    l.biases.assign(l.out, 0.0);
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpParams MlpParams::random(std::span<const int> dims, OutputMap output, Rng& rng) {
  MlpParams p = zeros(dims, output);
  for (auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : l.weights) w = u(rng);
    for (double& b : l.biases) b = u(rng);
  }
  return p;
}

std::vector<int> MlpParams::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in);
  for (const auto& l : layers) d.push_back(l.out);
  return d;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.biases.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    for (double w : l.weights)
      if (!std::isfinite(w)) return false;
    for (double b : l.biases)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

void MlpParams::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
}

const std::vector<double>& forward(const MlpParams& net, std::span<const double> input,
                                   ForwardCache& cache) {
  if (net.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                " entries, network expects " + std::to_string(net.input_size()));
  const std::size_t n_layers = net.layers.size();
  cache.inputs.resize(n_layers);
  cache.pre.resize(n_layers);
  cache.inputs[0].assign(input.begin(), input.end());
  for (std::size_t li = 0; li < n_layers; ++li) {
    const DenseLayer& l = net.layers[li];
    const std::vector<double>& x = cache.inputs[li];
    std::vector<double>& z = cache.pre[li];
    z.resize(l.out);
    // four rows at a time: independent accumulation chains, each row still
    // summed in column order
    int r = 0;
    for (; r + 4 <= l.out; r += 4) {
      const double* w0 = l.weights.data() + static_cast<std::size_t>(r) * l.in;
      const double* w1 = w0 + l.in;
      const double* w2 = w1 + l.in;
      const double* w3 = w2 + l.in;
      double a0 = l.biases[r], a1 = l.biases[r + 1], a2 = l.biases[r + 2], a3 = l.biases[r + 3];
      for (int c = 0; c < l.in; ++c) {
        const double xc = x[c];
        a0 += w0[c] * xc;
        a1 += w1[c] * xc;
        a2 += w2[c] * xc;
        a3 += w3[c] * xc;
      }
      z[r] = a0;
      z[r + 1] = a1;
      z[r + 2] = a2;
      z[r + 3] = a3;
    }
    for (; r < l.out; ++r) {
      const double* row = l.weights.data() + static_cast<std::size_t>(r) * l.in;
      double acc = l.biases[r];
      for (int c = 0; c < l.in; ++c) acc += row[c] * x[c];
      z[r] = acc;
    }
    std::vector<double>& next = li + 1 < n_layers ? cache.inputs[li + 1] : cache.output;
    next.resize(l.out);
    if (li + 1 < n_layers) {
      for (int r = 0; r < l.out; ++r) next[r] = z[r] > 0.0 ? z[r] : 0.0;
    } else if (net.output == OutputMap::kHalfTanh) {
      for (int r = 0; r < l.out; ++r) next[r] = 0.5 * std::tanh(z[r]) + 0.5;
    } else {
      next = z;
    }
  }
  return cache.output;
}

std::vector<double> forward(const MlpParams& net, std::span<const double> input) {
  ForwardCache cache;
  forward(net, input, cache);
  return std::move(cache.output);
}

namespace {

std::vector<double> backprop(const MlpParams& net, const ForwardCache& cache,
                             std::span<const double> upstream, MlpParams* grads) {
  if (grads) check_same_shape(net, *grads);
  if (static_cast<int>(upstream.size()) != net.output_size())
    throw std::invalid_argument("backward: upstream gradient size mismatch");
  if (cache.pre.size() != net.layers.size())
    throw std::invalid_argument("backward: cache does not belong to this network");

  const std::size_t n_layers = net.layers.size();
  // delta = dL/dz for the current layer
  std::vector<double> delta(upstream.begin(), upstream.end());
  if (net.output == OutputMap::kHalfTanh) {
    const auto& z = cache.pre.back();
    for (std::size_t r = 0; r < delta.size(); ++r) {
      const double t = std::tanh(z[r]);
      delta[r] *= 0.5 * (1.0 - t * t);
    }
  }
  std::vector<double> dx;
  for (std::size_t li = n_layers; li-- > 0;) {
    const DenseLayer& l = net.layers[li];
    const std::vector<double>& x = cache.inputs[li];
    dx.assign(l.in, 0.0);
    for (int r = 0; r < l.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double* row = l.weights.data() + static_cast<std::size_t>(r) * l.in;
      if (grads) {
        DenseLayer& g = grads->layers[li];
        g.biases[r] += d;
        double* grow = g.weights.data() + static_cast<std::size_t>(r) * l.in;
        for (int c = 0; c < l.in; ++c) grow[c] += d * x[c];
      }
      for (int c = 0; c < l.in; ++c) dx[c] += d * row[c];
    }
    if (li > 0) {
      const auto& zprev = cache.pre[li - 1];
      for (int c = 0; c < l.in; ++c)
        if (zprev[c] <= 0.0) dx[c] = 0.0;
    }
    delta.swap(dx);
  }
  return delta;
}

}  // namespace

std::vector<double> backward(const MlpParams& net, const ForwardCache& cache,
                             std::span<const double> upstream, MlpParams& grads) {
  return backprop(net, cache, upstream, &grads);
}

std::vector<double> input_gradient(const MlpParams& net, const ForwardCache& cache,
                                   std::span<const double> upstream) {
  return backprop(net, cache, upstream, nullptr);
}

void axpy(MlpParams& a, const MlpParams& b, double scale) {
  check_same_shape(a, b);
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    auto& la = a.layers[li];
    const auto& lb = b.layers[li];
    for (std::size_t i = 0; i < la.weights.size(); ++i) la.weights[i] += scale * lb.weights[i];
    for (std::size_t i = 0; i < la.biases.size(); ++i) la.biases[i] += scale * lb.biases[i];
  }
}

void sgd_step(MlpParams& params, const MlpParams& grads, double lr) { axpy(params, grads, -lr); }

void soft_update(MlpParams& target, const MlpParams& source, double tau) {
  check_same_shape(target, source);
  for (std::size_t li = 0; li < target.layers.size(); ++li) {
    auto& t = target.layers[li];
    const auto& s = source.layers[li];
    for (std::size_t i = 0; i < t.weights.size(); ++i)
      t.weights[i] = (1.0 - tau) * t.weights[i] + tau * s.weights[i];
    for (std::size_t i = 0; i < t.biases.size(); ++i)
      t.biases[i] = (1.0 - tau) * t.biases[i] + tau * s.biases[i];
  }
}

void Optimizer::step(MlpParams& params, const MlpParams& grads) {
  if (kind_ == OptimizerKind::kSgd) {
    sgd_step(params, grads, lr_);
    return;
  }
  if (velocity_.layers.empty()) velocity_ = MlpParams::zeros(params.dims(), params.output);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& v = velocity_.layers[li];
    const auto& g = grads.layers[li];
    for (std::size_t i = 0; i < v.weights.size(); ++i) v.weights[i] = momentum_ * v.weights[i] + g.weights[i];
    for (std::size_t i = 0; i < v.biases.size(); ++i) v.biases[i] = momentum_ * v.biases[i] + g.biases[i];
  }
  sgd_step(params, velocity_, lr_);
}

std::vector<std::uint8_t> serialize(const MlpParams& net) {
  ByteWriter w;
  w.u64(net.version);
  const auto dims = net.dims();
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) w.u32(static_cast<std::uint32_t>(d));
  for (const auto& l : net.layers) {
    for (double v : l.weights) w.f64(v);
    for (double v : l.biases) w.f64(v);
  }
  return w.take();
}

MlpParams deserialize(std::span<const std::uint8_t> bytes, OutputMap output) {
  ByteReader r(bytes);
  const std::uint64_t version = r.u64();
  const std::uint32_t count = r.u32();
  if (count < 2 || count > kMaxLayers)
    throw DecodeError("parameter payload: invalid layer count " + std::to_string(count));
  std::vector<int> dims(count);
  for (auto& d : dims) {
    const std::uint32_t v = r.u32();
    if (v == 0 || v > kMaxWidth) throw DecodeError("parameter payload: invalid layer width");
    d = static_cast<int>(v);
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    expected += (static_cast<std::size_t>(dims[i]) + 1) * dims[i + 1] * sizeof(double);
  if (r.remaining() < expected)
    throw DecodeError("parameter payload: truncated, need " + std::to_string(expected) +
                      " bytes of values, have " + std::to_string(r.remaining()));
  MlpParams p = MlpParams::zeros(dims, output);
  p.version = version;
  for (auto& l : p.layers) {
    for (double& v : l.weights) v = r.f64();
    for (double& v : l.biases) v = r.f64();
  }
  r.expect_done("parameter payload");
  return p;
}

}  // namespace schedlab
