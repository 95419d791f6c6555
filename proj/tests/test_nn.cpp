#include <doctest.h>

#include <array>
#include <cmath>
#include <numeric>

#include "schedlab/bytes.hpp"
#include "schedlab/nn.hpp"

using namespace schedlab;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Norm relative error between backprop and central differences of upstream . f(x).
double fd_error(MlpParams net, std::span<const double> x, std::span<const double> up) {
  MlpParams grads = net;
  grads.set_zero();
  ForwardCache cache;
  forward(net, x, cache);
  backward(net, cache, up, grads);

  const double h = 1e-5;
  std::vector<double> an, fd;
  grads.for_each([&](double g) { an.push_back(g); });
  net.for_each([&](double& p) {
    const double keep = p;
    p = keep + h;
    const double plus = dot(forward(net, x), up);
    p = keep - h;
    const double minus = dot(forward(net, x), up);
    p = keep;
    fd.push_back((plus - minus) / (2.0 * h));
  });
  double diff = 0.0, na = 0.0, nf = 0.0;
  for (std::size_t i = 0; i < an.size(); ++i) {
    diff += (an[i] - fd[i]) * (an[i] - fd[i]);
    na += an[i] * an[i];
    nf += fd[i] * fd[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nf)), 1e-300);
}

}  // namespace

TEST_CASE("zero actor outputs one half") {
  const std::array dims{6, 60, 60, 3};
  const MlpParams net = MlpParams::zeros(dims, OutputMap::kHalfTanh);
  for (double y : forward(net, std::vector<double>(6, 0.3))) CHECK(y == 0.5);
  CHECK(net.parameter_count() == 6u * 60 + 60 + 60u * 60 + 60 + 60u * 3 + 3);
}

TEST_CASE("identity linear layer passes the input through") {
  const std::array dims{3, 3};
  MlpParams net = MlpParams::zeros(dims, OutputMap::kLinear);
  for (int i = 0; i < 3; ++i) net.layers[0].weights[i * 3 + i] = 1.0;
  const std::vector<double> x{0.5, -2.0, 7.25};
  CHECK(forward(net, x) == x);
  CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("seeded forward pass regression") {
  Rng rng(2024);
  const std::array dims{4, 5, 3};
  const MlpParams net = MlpParams::random(dims, OutputMap::kHalfTanh, rng);
  const auto y = forward(net, std::vector<double>{0.1, -0.4, 0.9, 0.25});
  const std::array<double, 3> golden{0.67451187585393257, 0.46922328692898346, 0.51461213740505507};
  for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(golden[i]).epsilon(1e-14));
}

TEST_CASE("backward matches central differences on actor and critic shapes") {
  Rng rng(5);
  for (int k : {1, 3}) {
    const std::array actor_dims{2 * k, 20 * k, 20 * k, k};
    const std::array critic_dims{3 * k, 30 * k, 30 * k, k};
    const MlpParams actor = MlpParams::random(actor_dims, OutputMap::kHalfTanh, rng);
    const MlpParams critic = MlpParams::random(critic_dims, OutputMap::kLinear, rng);
    CHECK(fd_error(actor, random_vector(2 * k, rng), random_vector(k, rng)) < 1e-4);
    CHECK(fd_error(critic, random_vector(3 * k, rng), random_vector(k, rng)) < 1e-4);
  }
}

TEST_CASE("input gradient matches central differences") {
  Rng rng(6);
  const std::array dims{9, 90, 90, 3};
  const MlpParams net = MlpParams::random(dims, OutputMap::kLinear, rng);
  std::vector<double> x = random_vector(9, rng);
  const std::vector<double> up = random_vector(3, rng);
  ForwardCache cache;
  forward(net, x, cache);
  const std::vector<double> g = input_gradient(net, cache, up);
  MlpParams grads = net;
  grads.set_zero();
  CHECK(backward(net, cache, up, grads) == g);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + 1e-5;
    const double plus = dot(forward(net, x), up);
    x[i] = keep - 1e-5;
    const double minus = dot(forward(net, x), up);
    x[i] = keep;
    CHECK(g[i] == doctest::Approx((plus - minus) / 2e-5).epsilon(1e-6));
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  Rng rng(7);
  const std::array dims{4, 8, 2};
  const MlpParams net = MlpParams::random(dims, OutputMap::kHalfTanh, rng);
  MlpParams grads = net;
  grads.set_zero();
  ForwardCache cache;
  forward(net, random_vector(4, rng), cache);
  const auto gx = backward(net, cache, std::vector<double>{0.0, 0.0}, grads);
  grads.for_each([](double g) { CHECK(g == 0.0); });
  for (double g : gx) CHECK(g == 0.0);
}

TEST_CASE("a unit with negative pre-activation passes no gradient") {
  const std::array dims{1, 2, 1};
  MlpParams net = MlpParams::zeros(dims, OutputMap::kLinear);
  net.layers[0].weights = {1.0, -1.0};
  net.layers[1].weights = {1.0, 1.0};
  MlpParams grads = net;
  grads.set_zero();
  ForwardCache cache;
  forward(net, std::vector<double>{2.0}, cache);
  backward(net, cache, std::vector<double>{1.0}, grads);
  CHECK(grads.layers[0].weights[0] == 2.0);
  CHECK(grads.layers[0].weights[1] == 0.0);
  CHECK(grads.layers[0].biases[1] == 0.0);
  CHECK(grads.layers[1].weights[1] == 0.0);
}

TEST_CASE("sgd and soft updates") {
  const std::array dims{1, 1};
  MlpParams p = MlpParams::zeros(dims, OutputMap::kLinear);
  MlpParams g = p;
  sgd_step(p, g, 1e-3);
  CHECK(p.layers[0].weights[0] == 0.0);
  g.layers[0].weights[0] = 1.0;
  sgd_step(p, g, 1e-3);
  CHECK(p.layers[0].weights[0] == doctest::Approx(-0.001));

  MlpParams t = MlpParams::zeros(dims, OutputMap::kLinear);
  MlpParams s = t;
  s.layers[0].weights[0] = 1.0;
  s.layers[0].biases[0] = 3.0;
  MlpParams t0 = t;
  soft_update(t0, s, 0.0);
  CHECK(t0 == t);
  soft_update(t, s, 1e-3);
  CHECK(t.layers[0].weights[0] == doctest::Approx(0.001));
  soft_update(t, s, 1.0);
  CHECK(t.layers[0].weights == s.layers[0].weights);
  CHECK(t.layers[0].biases == s.layers[0].biases);
}

TEST_CASE("full-batch SGD on a quadratic toy decreases the loss monotonically") {
  Rng rng(8);
  const std::array dims{2, 16, 1};
  MlpParams net = MlpParams::random(dims, OutputMap::kLinear, rng);
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (int i = 0; i < 32; ++i) {
    xs.push_back(random_vector(2, rng));
    ys.push_back(xs.back()[0] * xs.back()[0] + 0.5 * xs.back()[1]);
  }
  auto loss_and_grad = [&](MlpParams* grads) {
    double loss = 0.0;
    ForwardCache cache;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double err = forward(net, xs[i], cache)[0] - ys[i];
      loss += err * err / xs.size();
      if (grads) backward(net, cache, std::vector<double>{2.0 * err / xs.size()}, *grads);
    }
    return loss;
  };
  double prev = loss_and_grad(nullptr);
  for (int step = 0; step < 100; ++step) {
    MlpParams grads = net;
    grads.set_zero();
    loss_and_grad(&grads);
    sgd_step(net, grads, 1e-2);
    const double now = loss_and_grad(nullptr);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("momentum optimizer differs from plain SGD only when enabled") {
  const std::array dims{1, 1};
  MlpParams a = MlpParams::zeros(dims, OutputMap::kLinear), b = a;
  MlpParams g = a;
  g.layers[0].weights[0] = 1.0;
  Optimizer sgd(OptimizerKind::kSgd, 0.1), heavy(OptimizerKind::kMomentum, 0.1, 0.9);
  for (int i = 0; i < 2; ++i) {
    sgd.step(a, g);
    heavy.step(b, g);
  }
  CHECK(a.layers[0].weights[0] == doctest::Approx(-0.2));
  CHECK(b.layers[0].weights[0] == doctest::Approx(-0.1 - 0.19));
}

TEST_CASE("actor output stays inside (0,1) for extreme inputs") {
  Rng rng(9);
  const std::array dims{6, 60, 60, 3};
  const MlpParams net = MlpParams::random(dims, OutputMap::kHalfTanh, rng);
  for (double scale : {0.0, 1.0, 1e3, 1e8}) {
    std::vector<double> x = random_vector(6, rng);
    for (double& v : x) v *= scale;
    for (double y : forward(net, x)) {
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
    }
  }
}

TEST_CASE("serialization round trip is bit exact") {
  Rng rng(10);
  const std::array dims{9, 90, 90, 3};
  MlpParams net = MlpParams::random(dims, OutputMap::kLinear, rng);
  net.version = 42;
  const auto bytes = serialize(net);
  const MlpParams back = deserialize(bytes, OutputMap::kLinear);
  CHECK(back == net);
  CHECK(back.version == 42);
  CHECK(serialize(back) == bytes);

  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
  CHECK_THROWS_AS(deserialize(cut, OutputMap::kLinear), DecodeError);
  std::vector<std::uint8_t> longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(deserialize(longer, OutputMap::kLinear), DecodeError);
}

TEST_CASE("same seed gives identical parameters") {
  Rng a(11), b(11);
  const std::array dims{6, 60, 60, 3};
  CHECK(MlpParams::random(dims, OutputMap::kHalfTanh, a) ==
        MlpParams::random(dims, OutputMap::kHalfTanh, b));
}
