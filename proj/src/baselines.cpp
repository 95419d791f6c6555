#include "schedlab/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "schedlab/drl.hpp"
#include "schedlab/parallel.hpp"

namespace schedlab {

const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRoundRobin: return "rr";
    case BaselineKind::kEarliestDeadlineFirst: return "edf";
    case BaselineKind::kMaxThroughput: return "mt";
  }
  return "?";
}

std::optional<BaselineKind> parse_baseline(const std::string& s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "rr") return BaselineKind::kRoundRobin;
  if (l == "edf") return BaselineKind::kEarliestDeadlineFirst;
  if (l == "mt") return BaselineKind::kMaxThroughput;
  return std::nullopt;
}

BaselinePolicy::BaselinePolicy(BaselineKind kind, bool window_aware, int d_min)
    : kind_(kind), window_aware_(window_aware), d_min_(d_min) {}

std::vector<int> BaselinePolicy::decide(std::span<const int> hol, std::span<const int> n_star,
                                        int n_total) {
  if (hol.size() != n_star.size()) throw std::invalid_argument("decide: length mismatch");
  const int k_users = static_cast<int>(hol.size());
  std::vector<int> x(k_users, 0);
  if (k_users == 0) return x;

  auto eligible = [&](int k) { return hol[k] > 0 && (!window_aware_ || hol[k] >= d_min_); };

  std::vector<int> order;
  order.reserve(k_users);
  if (kind_ == BaselineKind::kRoundRobin) {
    for (int i = 0; i < k_users; ++i) order.push_back((cursor_ + i) % k_users);
  } else {
    order.resize(k_users);
    std::iota(order.begin(), order.end(), 0);
    if (kind_ == BaselineKind::kEarliestDeadlineFirst) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return hol[a] > hol[b]; });
    } else {
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return n_star[a] < n_star[b]; });
    }
  }

  int budget = n_total;
  int last = -1;
  for (int k : order) {
    if (!eligible(k) || n_star[k] > budget) continue;
    x[k] = 1;
    budget -= n_star[k];
    last = k;
  }
  if (kind_ == BaselineKind::kRoundRobin && last >= 0) cursor_ = (last + 1) % k_users;
  return x;
}

PolicyFactory baseline_factory(BaselineKind kind, const SystemConfig& cfg, bool window_aware) {
  const int d_min = cfg.d_min;
  const int n_total = cfg.rbs;
  const Mode mode = cfg.mode;
  return [=]() -> PolicyFn {
    auto policy = std::make_shared<BaselinePolicy>(kind, window_aware, d_min);
    return [policy, n_total, mode](const Environment& env) {
      SchedulerAction a;
      a.mode = mode;
      a.values = policy->decide(env.hol(), env.n_star(), n_total);
      if (mode == Mode::kStraightforward) {
        // RB-count actions: an admitted user asks for exactly n*
        for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] *= env.n_star()[k];
      }
      return a;
    };
  };
}

PolicyFactory actor_factory(const MlpParams& actor, const SystemConfig& cfg) {
  auto shared = std::make_shared<const MlpParams>(actor);
  const int n_total = cfg.rbs;
  return [=]() -> PolicyFn {
    return [shared, n_total](const Environment& env) {
      return act_greedy(*shared, env.state(), n_total);
    };
  };
}

EpisodeMetrics EvalResult::as_metrics(int window) const {
  EpisodeMetrics m;
  m.window = window;
  m.loss_prob = loss_prob;
  m.avg_reward = avg_reward;
  m.losses = losses;
  m.arrivals = arrivals;
  m.slots = slots;
  m.worst_reward = avg_reward.empty() ? 0.0 : *std::min_element(avg_reward.begin(), avg_reward.end());
  return m;
}

EvalResult evaluate(const SystemConfig& cfg, const PolicyFactory& make_policy, int episodes,
                    std::uint64_t seed, ExecPolicy exec) {
  if (episodes < 0) throw std::invalid_argument("evaluate: negative episode count");
  cfg.validate();
  const int k_users = cfg.users;
  struct Tally {
    std::vector<std::int64_t> losses, arrivals;
    std::vector<double> reward;
  };
  std::vector<Tally> per_episode(episodes);
  const SeedTree root(seed);
  parallel_for(exec, episodes, [&](std::int64_t e) {
    Tally& t = per_episode[e];
    t.losses.assign(k_users, 0);
    t.arrivals.assign(k_users, 0);
    t.reward.assign(k_users, 0.0);
    Environment env(cfg, root.child("eval", static_cast<std::uint64_t>(e)));
    PolicyFn policy = make_policy();
    for (int s = 0; s < cfg.episode_slots; ++s) {
      const StepResult step = env.step(policy(env));
      for (int k = 0; k < k_users; ++k) {
        t.losses[k] += step.losses[k];
        t.arrivals[k] += step.arrivals[k];
        t.reward[k] += step.reward.per_user[k];
      }
    }
  });

  EvalResult r;
  r.losses.assign(k_users, 0);
  r.arrivals.assign(k_users, 0);
  std::vector<double> reward(k_users, 0.0);
  for (const Tally& t : per_episode) {
    for (int k = 0; k < k_users; ++k) {
      r.losses[k] += t.losses[k];
      r.arrivals[k] += t.arrivals[k];
      reward[k] += t.reward[k];
    }
  }
  r.slots = static_cast<std::int64_t>(episodes) * cfg.episode_slots;
  r.loss_prob.resize(k_users);
  r.avg_reward.resize(k_users);
  for (int k = 0; k < k_users; ++k) {
    r.loss_prob[k] = r.arrivals[k] > 0
                         ? std::min(1.0, static_cast<double>(r.losses[k]) / r.arrivals[k])
                         : 0.0;
    r.avg_reward[k] = r.slots > 0 ? reward[k] / static_cast<double>(r.slots) : 0.0;
    if (r.loss_prob[k] > r.worst_loss || k == 0) {
      r.worst_loss = r.loss_prob[k];
      r.worst_user = k;
    }
  }
  if (k_users > 0) {
    r.mean_loss = std::accumulate(r.loss_prob.begin(), r.loss_prob.end(), 0.0) / k_users;
    r.mean_reward = std::accumulate(r.avg_reward.begin(), r.avg_reward.end(), 0.0) / k_users;
  }
  return r;
}

}  // namespace schedlab
