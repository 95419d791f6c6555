#pragma once

// Replay memory with uniform and weight-proportional sampling. Weights live
// in a sum/max segment tree so sampling, weight updates and the running
// maximum are all O(log |I|).

#include <cstdint>
#include <span>
#include <vector>

#include "schedlab/rng.hpp"

namespace schedlab {

struct Transition {
  std::vector<double> state;       // flattened NetworkState (2K)
  std::vector<double> action;      // continuous action fed to the critic (K)
  std::vector<std::uint8_t> scheduled;  // executed x_k (K)
  std::vector<int> hol;            // d_k at the transition's slot (K)
  std::vector<double> reward;      // per-user training reward (shaped or not)
  std::vector<double> next_state;  // 2K
  double weight = 0.0;
  std::int64_t slot_index = 0;
};

enum class SamplingMode { kUniform, kPrioritized };

struct SampledBatch {
  std::vector<std::size_t> indices;  // storage slots, duplicates allowed
  std::vector<double> probabilities; // selection probability of each draw
};

class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, double initial_weight = 1e-3, double weight_floor = 1e-8);

  /// Stores `t` with weight = max stored weight (initial_weight when empty),
  /// evicting the oldest entry once full. Returns the storage slot.
  std::size_t push(Transition t);

  /// n draws with replacement. Throws std::logic_error when empty and
  /// std::invalid_argument for n == 0.
  SampledBatch sample(std::size_t n, SamplingMode mode, Rng& rng) const;

  /// Sets a stored weight, clamped below at the weight floor.
  void set_weight(std::size_t slot, double weight);

  const Transition& at(std::size_t slot) const { return items_.at(slot); }
  double weight(std::size_t slot) const;
  double probability(std::size_t slot) const;
  double total_weight() const { return sum_[1]; }
  double max_weight() const { return max_[1]; }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  double weight_floor() const { return weight_floor_; }

 private:
  void write_leaf(std::size_t slot, double w);

  std::size_t capacity_;
  std::size_t leaves_;  // power of two >= capacity
  double initial_weight_;
  double weight_floor_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  std::vector<double> sum_;  // 1-based heap layout
  std::vector<double> max_;
};

/// Importance-sampling correction u = 1 / (p * |I|).
double bias_weight(double p_selected, std::size_t memory_size);

/// New weight from per-head TD errors and per-user loss indicators:
/// sum_k td_k^2 * (1 + loss_k), loss_k = (not scheduled and d_k = D_max) or
/// (scheduled and d_k outside [D_min, D_max]). With a single head the factor
/// is 2 when any user lost a packet.
double transition_weight(std::span<const double> td_errors, std::span<const std::uint8_t> scheduled,
                         std::span<const int> hol, int d_min, int d_max);

}  // namespace schedlab
