#pragma once

// DDPG and knowledge-assisted DDPG (multi-head critic, potential-based reward
// shaping, importance sampling) for the scheduling MDPs.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/env.hpp"
#include "schedlab/metrics.hpp"
#include "schedlab/nn.hpp"
#include "schedlab/replay.hpp"
#include "schedlab/rng.hpp"

namespace schedlab {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Random-walk exploration noise: N_k(t) = N_k(t-1) + delta * Normal(0, sigma^2).
class ExplorationNoise {
 public:
  ExplorationNoise(int users, double sigma, double delta);
  void reset();
  const std::vector<double>& next(Rng& rng);
  const std::vector<double>& value() const { return noise_; }

 private:
  double sigma_;
  double delta_;
  std::vector<double> noise_;
};

/// Nearest valid action to a continuous actor output. T-DRL thresholds each
/// entry at 0.5 (ties schedule); straightforward rounds out_k * N half-up.
SchedulerAction to_discrete_action(std::span<const double> actor_out, Mode mode, int n_total);

/// Main networks (soft-updated) and the working copies trained by SGD.
struct Networks {
  MlpParams actor;
  MlpParams critic;
  MlpParams actor_copy;
  MlpParams critic_copy;

  static Networks init(const SystemConfig& cfg, Rng& rng);
  /// Replaces both actor and its copy, e.g. with an off-line trained actor.
  void load_actor(const MlpParams& a);
  void load_critic(const MlpParams& c);
};

struct TrainingBatch {
  std::vector<const Transition*> items;
  std::vector<double> u;  // importance-sampling correction per draw
};

struct LossReport {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  /// Per draw, per head: y - Q(s, a | main critic); drives the replay weights.
  std::vector<std::vector<double>> td_errors;
  MlpParams critic_grad;  // d critic_loss / d critic_copy
  MlpParams actor_grad;   // d actor_loss / d actor_copy
};

/// Critic loss (1/N) sum_i u_i sum_h (y_ih - Q_h(s_i, a_i | critic_copy))^2 and
/// actor loss -(1/N) sum_i u_i sum_h Q_h(s_i, actor_copy(s_i) | critic_copy),
/// with targets y_ih = r_ih + gamma Q_h(s'_i, actor(s'_i) | critic) from the main
/// networks. A single-head critic is trained on the summed user rewards.
LossReport kddpg_losses(const TrainingBatch& batch, const Networks& nets, double gamma,
                        ExecPolicy exec = ExecPolicy::kSerial, bool with_gradients = true);

/// Scalar-critic DDPG losses (uniform weights, summed reward). Written
/// independently of kddpg_losses; the two agree on single-head critics.
LossReport ddpg_losses(const TrainingBatch& batch, const Networks& nets, double gamma,
                       bool with_gradients = true);

/// Offline trainer. Owns the environment, networks and replay memory.
class Trainer {
 public:
  explicit Trainer(const SystemConfig& cfg);
  Trainer(const SystemConfig& cfg, Networks init);

  /// Runs cfg.episodes episodes, reporting one EpisodeMetrics per window.
  std::vector<EpisodeMetrics> train(const std::function<void(const EpisodeMetrics&)>& sink = {});

  /// One episode of interaction with a training iteration per slot.
  void run_episode();

  /// Sample, reweight, compute gradients, SGD on the copies, soft-update.
  /// Throws TrainingDiverged on a non-finite loss.
  LossReport train_iteration();

  /// Adds a transition built from an environment step (applies shaping per flags).
  void remember(const NetworkState& state, std::span<const double> action,
                const StepResult& step);
  /// Adds an externally produced transition (online server uploads).
  void push(Transition t);

  /// Trains through ddpg_losses instead of kddpg_losses. Needs all flags off.
  void use_reference_ddpg(bool on);

  const Networks& networks() const { return nets_; }
  Networks& networks() { return nets_; }
  const ReplayMemory& memory() const { return memory_; }
  Environment& environment() { return env_; }
  const SystemConfig& config() const { return cfg_; }
  std::int64_t slots() const { return total_slots_; }
  const MetricsWindow& window() const { return window_; }

 private:
  SystemConfig cfg_;
  SeedTree seeds_;
  Environment env_;
  Networks nets_;
  ReplayMemory memory_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ExplorationNoise noise_;
  Rng explore_rng_;
  Rng sample_rng_;
  MetricsWindow window_;
  std::int64_t total_slots_ = 0;
  bool reference_ddpg_ = false;
};

/// Builds a training transition from an environment step.
Transition make_transition(const NetworkState& state, std::span<const double> action,
                           const StepResult& step, bool shaped, std::int64_t slot);

/// Greedy (noise-free) actor policy as a scheduler.
SchedulerAction act_greedy(const MlpParams& actor, const NetworkState& state, int n_total);

}  // namespace schedlab
