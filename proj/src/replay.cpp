#include "schedlab/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace schedlab {

ReplayMemory::ReplayMemory(std::size_t capacity, double initial_weight, double weight_floor)
    : capacity_(capacity), initial_weight_(initial_weight), weight_floor_(weight_floor) {
  if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
  if (!(initial_weight > 0.0)) throw std::invalid_argument("ReplayMemory: initial weight must be > 0");
  if (!(weight_floor > 0.0)) throw std::invalid_argument("ReplayMemory: weight floor must be > 0");
  leaves_ = 1;
  while (leaves_ < capacity_) leaves_ <<= 1;
  sum_.assign(2 * leaves_, 0.0);
  max_.assign(2 * leaves_, 0.0);
  items_.reserve(capacity_);
}

void ReplayMemory::write_leaf(std::size_t slot, double w) {
  std::size_t i = leaves_ + slot;
  sum_[i] = w;
  max_[i] = w;
  for (i >>= 1; i >= 1; i >>= 1) {
    // recomputed from children so the root never accumulates drift
    sum_[i] = sum_[2 * i] + sum_[2 * i + 1];
    max_[i] = std::max(max_[2 * i], max_[2 * i + 1]);
  }
}

std::size_t ReplayMemory::push(Transition t) {
  const double w = items_.empty() ? initial_weight_ : max_weight();
  t.weight = w;
  std::size_t slot;
  if (items_.size() < capacity_) {
    slot = items_.size();
    items_.push_back(std::move(t));
  } else {
    slot = next_;
    items_[slot] = std::move(t);
  }
  next_ = (slot + 1) % capacity_;
  write_leaf(slot, w);
  return slot;
}

void ReplayMemory::set_weight(std::size_t slot, double weight) {
  if (slot >= items_.size()) throw std::out_of_range("ReplayMemory::set_weight: bad slot");
  const double w = std::max(weight, weight_floor_);
  items_[slot].weight = w;
  write_leaf(slot, w);
}

double ReplayMemory::weight(std::size_t slot) const { return items_.at(slot).weight; }

double ReplayMemory::probability(std::size_t slot) const {
  return items_.at(slot).weight / total_weight();
}

SampledBatch ReplayMemory::sample(std::size_t n, SamplingMode mode, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayMemory::sample: memory is empty");
  if (n == 0) throw std::invalid_argument("ReplayMemory::sample: batch size must be positive");
  SampledBatch b;
  b.indices.reserve(n);
  b.probabilities.reserve(n);
  const std::size_t size = items_.size();
  if (mode == SamplingMode::kUniform) {
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    for (std::size_t i = 0; i < n; ++i) {
      b.indices.push_back(pick(rng));
      b.probabilities.push_back(1.0 / static_cast<double>(size));
    }
    return b;
  }
  const double total = total_weight();
  std::uniform_real_distribution<double> u(0.0, total);
  for (std::size_t i = 0; i < n; ++i) {
    double target = u(rng);
    std::size_t node = 1;
    while (node < leaves_) {
      const std::size_t left = 2 * node;
      if (target < sum_[left] || sum_[left + 1] <= 0.0) {
        node = left;
      } else {
        target -= sum_[left];
        node = left + 1;
      }
    }
    std::size_t slot = node - leaves_;
    if (slot >= size) slot = size - 1;  // rounding at the right edge
    b.indices.push_back(slot);
    b.probabilities.push_back(items_[slot].weight / total);
  }
  return b;
}

double bias_weight(double p_selected, std::size_t memory_size) {
  if (!(p_selected > 0.0) || memory_size == 0)
    throw std::invalid_argument("bias_weight: need p > 0 and a non-empty memory");
  return 1.0 / (p_selected * static_cast<double>(memory_size));
}

double transition_weight(std::span<const double> td_errors, std::span<const std::uint8_t> scheduled,
                         std::span<const int> hol, int d_min, int d_max) {
  if (scheduled.size() != hol.size())
    throw std::invalid_argument("transition_weight: scheduled/hol length mismatch");
  auto lost = [&](std::size_t k) {
    const int d = hol[k];
    return scheduled[k] ? (d < d_min || d > d_max) : d == d_max;
  };
  if (td_errors.size() == hol.size()) {
    double w = 0.0;
    for (std::size_t k = 0; k < td_errors.size(); ++k)
      w += td_errors[k] * td_errors[k] * (lost(k) ? 2.0 : 1.0);
    return w;
  }
  if (td_errors.size() != 1)
    throw std::invalid_argument("transition_weight: need one TD error per user or a single head");
  bool any = false;
  for (std::size_t k = 0; k < hol.size(); ++k) any = any || lost(k);
  return td_errors[0] * td_errors[0] * (any ? 2.0 : 1.0);
}

}  // namespace schedlab
