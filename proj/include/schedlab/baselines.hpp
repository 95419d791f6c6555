#pragma once

// Reference schedulers (round robin, earliest deadline first, max throughput)
// and an episode-parallel evaluation harness shared with learned actors.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/env.hpp"
#include "schedlab/metrics.hpp"
#include "schedlab/nn.hpp"

namespace schedlab {

enum class BaselineKind { kRoundRobin, kEarliestDeadlineFirst, kMaxThroughput };

const char* to_string(BaselineKind k);
/// Accepts "rr", "edf", "mt" (case-insensitive); nullopt otherwise.
std::optional<BaselineKind> parse_baseline(const std::string& s);

class BaselinePolicy {
 public:
  /// With `window_aware`, users whose HoL delay is below d_min are held back.
  /// The classic schedulers (window_aware = false) ignore d_min.
  explicit BaselinePolicy(BaselineKind kind, bool window_aware = false, int d_min = 0);

  /// hol[k] == 0 marks an empty queue. Admits whole users in policy order,
  /// skipping any whose n* exceeds the remaining budget.
  std::vector<int> decide(std::span<const int> hol, std::span<const int> n_star, int n_total);

  BaselineKind kind() const { return kind_; }
  int cursor() const { return cursor_; }

 private:
  BaselineKind kind_;
  bool window_aware_;
  int d_min_;
  int cursor_ = 0;
};

/// Decides one slot from the live environment.
using PolicyFn = std::function<SchedulerAction(const Environment&)>;
/// Produces a fresh policy (fresh RR cursor) for each evaluation episode.
using PolicyFactory = std::function<PolicyFn()>;

PolicyFactory baseline_factory(BaselineKind kind, const SystemConfig& cfg, bool window_aware = false);
PolicyFactory actor_factory(const MlpParams& actor, const SystemConfig& cfg);

struct EvalResult {
  std::vector<std::int64_t> losses;
  std::vector<std::int64_t> arrivals;
  std::vector<double> loss_prob;
  std::vector<double> avg_reward;  // unshaped reward per slot
  double mean_loss = 0.0;
  double worst_loss = 0.0;
  int worst_user = 0;
  double mean_reward = 0.0;
  std::int64_t slots = 0;

  /// Single-window metrics record for CSV output.
  EpisodeMetrics as_metrics(int window = 0) const;
};

/// Runs `episodes` independent episodes of cfg.episode_slots slots. Episode e
/// uses the seed tree SeedTree(seed).child("eval", e), so results do not
/// depend on the execution policy.
EvalResult evaluate(const SystemConfig& cfg, const PolicyFactory& make_policy, int episodes,
                    std::uint64_t seed, ExecPolicy exec = ExecPolicy::kSerial);

}  // namespace schedlab
