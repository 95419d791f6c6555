#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "schedlab/replay.hpp"

using namespace schedlab;

namespace {

Transition tagged(std::int64_t slot) {
  Transition t;
  t.state = {0.0, 0.0};
  t.action = {0.5};
  t.scheduled = {1};
  t.hol = {5};
  t.reward = {1.0};
  t.next_state = {0.0, 0.0};
  t.slot_index = slot;
  return t;
}

}  // namespace

TEST_CASE("push assigns the current maximum weight") {
  ReplayMemory m(4);
  m.push(tagged(0));
  CHECK(m.weight(0) == 1e-3);
  m.set_weight(0, 5.0);
  const std::size_t s = m.push(tagged(1));
  CHECK(m.weight(s) == 5.0);
  CHECK(m.max_weight() == 5.0);
}

TEST_CASE("eviction drops the oldest entry and keeps the max bookkeeping") {
  ReplayMemory m(3);
  for (int i = 0; i < 3; ++i) m.push(tagged(i));
  m.set_weight(0, 9.0);
  m.set_weight(1, 2.0);
  m.set_weight(2, 1.0);
  m.push(tagged(3));  // overwrites slot 0 with weight 9 inherited from the max
  CHECK(m.size() == 3);
  CHECK(m.at(0).slot_index == 3);
  CHECK(m.weight(0) == 9.0);
  m.set_weight(0, 0.5);
  CHECK(m.max_weight() == 2.0);
  m.push(tagged(4));
  CHECK(m.at(1).slot_index == 4);
  CHECK(m.weight(1) == 2.0);

  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  ReplayMemory big(37);
  for (int i = 0; i < 500; ++i) {
    const std::size_t s = big.push(tagged(i));
    big.set_weight(s, u(rng));
    double mx = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < big.size(); ++j) {
      mx = std::max(mx, big.weight(j));
      sum += big.weight(j);
    }
    CHECK(big.max_weight() == mx);
    CHECK(big.total_weight() == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("weights are floored") {
  ReplayMemory m(2);
  m.push(tagged(0));
  m.set_weight(0, 0.0);
  CHECK(m.weight(0) == 1e-8);
  CHECK_THROWS(m.set_weight(5, 1.0));
}

TEST_CASE("selection probabilities") {
  ReplayMemory m(2);
  m.push(tagged(0));
  m.push(tagged(1));
  m.set_weight(0, 1.0);
  m.set_weight(1, 3.0);
  CHECK(m.probability(0) == doctest::Approx(0.25));
  CHECK(m.probability(1) == doctest::Approx(0.75));

  Rng rng(5);
  const SampledBatch b = m.sample(100000, SamplingMode::kPrioritized, rng);
  const auto ones = std::count(b.indices.begin(), b.indices.end(), std::size_t{1});
  CHECK(std::fabs(ones / 1e5 - 0.75) <= 0.02);
  for (std::size_t i = 0; i < b.indices.size(); ++i)
    CHECK(b.probabilities[i] == m.probability(b.indices[i]));
}

TEST_CASE("probabilities sum to one") {
  Rng rng(6);
  std::uniform_real_distribution<double> u(1e-6, 100.0);
  ReplayMemory m(1000);
  for (int i = 0; i < 1000; ++i) m.set_weight(m.push(tagged(i)), u(rng));
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) total += m.probability(i);
  CHECK(std::fabs(total - 1.0) <= 1e-12);
}

TEST_CASE("equal weights sample like the uniform mode") {
  ReplayMemory m(8);
  for (int i = 0; i < 8; ++i) m.push(tagged(i));
  Rng rng(7);
  const SampledBatch b = m.sample(80000, SamplingMode::kPrioritized, rng);
  std::vector<int> counts(8, 0);
  for (std::size_t i : b.indices) ++counts[i];
  for (int c : counts) CHECK(std::fabs(c / 80000.0 - 0.125) <= 0.01);
  for (double p : b.probabilities) CHECK(p == doctest::Approx(0.125));

  const SampledBatch uni = m.sample(10, SamplingMode::kUniform, rng);
  for (double p : uni.probabilities) CHECK(p == 0.125);
}

TEST_CASE("single item is always selected") {
  ReplayMemory m(4);
  m.push(tagged(0));
  Rng rng(8);
  const SampledBatch b = m.sample(50, SamplingMode::kPrioritized, rng);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(b.indices[i] == 0);
    CHECK(b.probabilities[i] == 1.0);
  }
}

TEST_CASE("sampling errors") {
  ReplayMemory m(4);
  Rng rng(9);
  CHECK_THROWS_AS(m.sample(1, SamplingMode::kUniform, rng), std::logic_error);
  m.push(tagged(0));
  CHECK_THROWS_AS(m.sample(0, SamplingMode::kUniform, rng), std::invalid_argument);
}

TEST_CASE("bias correction factor") {
  CHECK(bias_weight(0.75, 2) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(bias_weight(1.0 / 10000, 10000) == doctest::Approx(1.0));
  CHECK_THROWS(bias_weight(0.0, 3));
  CHECK_THROWS(bias_weight(0.5, 0));
}

TEST_CASE("transition weight update") {
  const std::vector<std::uint8_t> sched{1, 1};
  const std::vector<int> hol{6, 6};
  CHECK(transition_weight(std::vector<double>{1.0, 1.0}, sched, hol, 5, 7) == 2.0);
  // user 1 left unscheduled at D_max loses its packet
  CHECK(transition_weight(std::vector<double>{1.0, 1.0}, std::vector<std::uint8_t>{0, 1},
                          std::vector<int>{7, 6}, 5, 7) == 3.0);
  // scheduled before the window is also a loss
  CHECK(transition_weight(std::vector<double>{2.0, 1.0}, std::vector<std::uint8_t>{1, 0},
                          std::vector<int>{3, 2}, 5, 7) == 9.0);
  CHECK(transition_weight(std::vector<double>{0.0, 0.0}, sched, hol, 5, 7) == 0.0);
  // single head: the factor is 2 if any user lost
  CHECK(transition_weight(std::vector<double>{3.0}, std::vector<std::uint8_t>{0, 1},
                          std::vector<int>{7, 6}, 5, 7) == 18.0);
  CHECK_THROWS(transition_weight(std::vector<double>{1.0, 1.0, 1.0}, sched, hol, 5, 7));
}

TEST_CASE("prioritized statistics match the selection rule and the correction is unbiased") {
  const oracle::ReplayReport r = oracle::replay_suite(50, 100000, 12);
  CHECK(r.max_freq_error <= 0.02);
  CHECK(r.unbiased_rel_error <= 0.01);
}
