#pragma once

// The two scheduling MDPs built on the radio and link models:
//  - straightforward: state = (HoL, log SNR), action = RB counts, 0/1 rewards;
//  - T-DRL: state = (HoL, n*/N), action = binary schedule flags, log rewards.

#include <cstdint>
#include <span>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/fblcomms.hpp"
#include "schedlab/radio.hpp"
#include "schedlab/rng.hpp"

namespace schedlab {

struct NetworkState {
  Mode mode = Mode::kTdrl;
  std::vector<double> hol_norm;     // d_k / D_max
  std::vector<double> second_half;  // n*_k / N (T-DRL) or log phi_k / log phi_max

  std::vector<double> flatten() const;
  std::size_t users() const { return hol_norm.size(); }
};

struct SchedulerAction {
  Mode mode = Mode::kTdrl;
  std::vector<int> values;  // x_k in {0,1} (T-DRL) or n_k in [0,N]
};

struct RewardVector {
  std::vector<double> per_user;
  bool shaped = false;
  double total() const;
};

struct QosWindow {
  int d_min = 5;
  int d_max = 7;
  bool contains(int d) const { return d >= d_min && d <= d_max; }
};

struct PotentialParams {
  double psi_min = 0.0;
  double psi_max = 1.0;
  int d_min = 5;
};

/// RB allocation from binary schedule flags; proportional floor when the
/// requested total exceeds n_total. Sum of the result never exceeds n_total.
std::vector<int> allocate_rbs(std::span<const int> x, std::span<const int> n_star, int n_total);

/// -ln(1 - r_tilde) for a reliability-style reward r_tilde in [0,1).
double log_reward(double r_tilde);

/// T-DRL user reward: -ln(1 - 1{in window} (1 - eps)) when scheduled, else 0.
/// Bounded above by -ln(kProbabilityFloor).
double user_reward_tdrl(int d, bool scheduled, double eps, const QosWindow& w);

/// Straightforward user reward: 1 iff scheduled, in window and decoded.
int user_reward_straightforward(int d, bool scheduled, bool decode_ok, const QosWindow& w);

/// Linear ramp from psi_min at d=0 to psi_max at d=D_min, flat afterwards.
double potential(int d, const PotentialParams& pp);

double shape_reward(double r_hat, int d_now, int d_next, double gamma, const PotentialParams& pp);

struct StepResult {
  NetworkState next_state;
  RewardVector reward;  // unshaped per-user rewards
  RewardVector shaped;  // potential-shaped per-user rewards
  std::vector<int> scheduled;  // executed x_k after masking and allocation
  std::vector<int> allocated;  // n_k
  std::vector<int> hol_before;
  std::vector<int> hol_after;
  std::vector<int> losses;
  std::vector<int> arrivals;
  std::vector<int> deliveries;
  int masked = 0;  // requested users dropped because their queue was empty
};

class Environment {
 public:
  /// Streams are drawn from `seeds` ("channel", "arrivals", "decode").
  Environment(const SystemConfig& cfg, const SeedTree& seeds);

  /// New episode: empty queues, fresh positions and fades.
  const NetworkState& reset();

  StepResult step(const SchedulerAction& action);

  const NetworkState& state() const { return state_; }
  const SystemConfig& config() const { return cfg_; }
  int users() const { return cfg_.users; }
  std::int64_t slot() const { return slot_; }
  std::span<const int> hol() const { return hol_; }
  std::span<const int> n_star() const { return n_star_; }
  std::span<const UserChannel> channels() const { return channels_; }
  /// Packets still queued (neither delivered nor lost yet).
  int backlog() const;

  LinkParams link_for(int user) const;

 private:
  void observe();

  SystemConfig cfg_;
  RadioParams radio_;
  QosWindow window_;
  PotentialParams potential_;
  Rng channel_rng_;
  Rng arrival_rng_;
  Rng decode_rng_;
  std::vector<UserChannel> channels_;
  std::vector<UserQueue> queues_;
  std::vector<int> hol_;
  std::vector<int> n_star_;
  NetworkState state_;
  std::int64_t slot_ = 0;
};

QosWindow window_of(const SystemConfig& cfg);
PotentialParams potential_of(const SystemConfig& cfg);

}  // namespace schedlab
