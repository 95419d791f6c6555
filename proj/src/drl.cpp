#include "schedlab/drl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "schedlab/parallel.hpp"

namespace schedlab {

ExplorationNoise::ExplorationNoise(int users, double sigma, double delta)
    : sigma_(sigma), delta_(delta), noise_(users, 0.0) {
  if (users < 0 || sigma < 0.0 || delta < 0.0)
    throw std::invalid_argument("ExplorationNoise: negative size or scale");
}

void ExplorationNoise::reset() { std::fill(noise_.begin(), noise_.end(), 0.0); }

const std::vector<double>& ExplorationNoise::next(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& n : noise_) n += delta_ * sigma_ * normal(rng);
  return noise_;
}

SchedulerAction to_discrete_action(std::span<const double> actor_out, Mode mode, int n_total) {
  SchedulerAction a;
  a.mode = mode;
  a.values.resize(actor_out.size());
  for (std::size_t k = 0; k < actor_out.size(); ++k) {
    const double v = std::clamp(actor_out[k], 0.0, 1.0);
    if (mode == Mode::kTdrl) {
      a.values[k] = v >= 0.5 ? 1 : 0;
    } else {
      const double n = std::floor(v * n_total + 0.5);
      a.values[k] = std::clamp(static_cast<int>(n), 0, std::max(n_total, 0));
    }
  }
  return a;
}

Networks Networks::init(const SystemConfig& cfg, Rng& rng) {
  Networks n;
  n.actor = MlpParams::random(cfg.actor_dims(), OutputMap::kHalfTanh, rng);
  n.critic = MlpParams::random(cfg.critic_dims(), OutputMap::kLinear, rng);
  n.actor_copy = n.actor;
  n.critic_copy = n.critic;
  return n;
}

void Networks::load_actor(const MlpParams& a) {
  if (a.dims() != actor.dims()) throw std::invalid_argument("load_actor: shape mismatch");
  actor = a;
  actor_copy = a;
}

void Networks::load_critic(const MlpParams& c) {
  if (c.dims() != critic.dims()) throw std::invalid_argument("load_critic: shape mismatch");
  critic = c;
  critic_copy = c;
}

namespace {

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct ItemResult {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::vector<double> td;
  MlpParams critic_grad;
  MlpParams actor_grad;
};

/// Training rewards per head: per-user for a multi-head critic, summed otherwise.
std::vector<double> head_rewards(const Transition& t, int heads) {
  if (static_cast<int>(t.reward.size()) == heads) return t.reward;
  double sum = 0.0;
  for (double r : t.reward) sum += r;
  return {sum};
}

void check_batch(const TrainingBatch& batch, const Networks& nets) {
  if (batch.items.empty()) throw std::invalid_argument("losses: empty batch");
  if (batch.u.size() != batch.items.size())
    throw std::invalid_argument("losses: need one correction factor per draw");
  const int heads = nets.critic.output_size();
  for (const Transition* t : batch.items) {
    if (!t) throw std::invalid_argument("losses: null transition");
    const int r = static_cast<int>(t->reward.size());
    if (heads != 1 && r != heads)
      throw std::invalid_argument("losses: reward length does not match critic heads");
  }
}

// One draw of the K-DDPG objective. When `grads` is false only the losses and
// TD errors are filled in.
void kddpg_item(const Transition& t, double u, double n_tr, const Networks& nets, double gamma,
                bool grads, ItemResult& out, MlpParams* critic_acc, MlpParams* actor_acc) {
  const int heads = nets.critic.output_size();
  const int k_users = nets.actor.output_size();
  const std::vector<double> r = head_rewards(t, heads);

  // Bellman targets from the main networks, deterministic actor (no noise)
  const std::vector<double> next_action = forward(nets.actor, t.next_state);
  const std::vector<double> next_q = forward(nets.critic, concat(t.next_state, next_action));
  const std::vector<double> sa = concat(t.state, t.action);
  const std::vector<double> q_main = forward(nets.critic, sa);

  ForwardCache critic_cache;
  const std::vector<double>& q = forward(nets.critic_copy, sa, critic_cache);

  out.td.assign(heads, 0.0);
  std::vector<double> upstream(heads);
  double sq = 0.0;
  for (int h = 0; h < heads; ++h) {
    const double y = r[h] + gamma * next_q[h];
    out.td[h] = y - q_main[h];
    const double diff = y - q[h];
    sq += diff * diff;
    upstream[h] = -2.0 * u * diff / n_tr;
  }
  out.critic_loss = u * sq / n_tr;

  ForwardCache actor_cache;
  const std::vector<double>& a = forward(nets.actor_copy, t.state, actor_cache);
  ForwardCache policy_cache;
  const std::vector<double>& qa = forward(nets.critic_copy, concat(t.state, a), policy_cache);
  double q_sum = 0.0;
  for (double v : qa) q_sum += v;
  out.actor_loss = -u * q_sum / n_tr;

  if (!grads) return;
  backward(nets.critic_copy, critic_cache, upstream, *critic_acc);

  const std::vector<double> up_q(heads, -u / n_tr);
  const std::vector<double> d_input = input_gradient(nets.critic_copy, policy_cache, up_q);
  const std::size_t offset = t.state.size();
  const std::vector<double> d_action(d_input.begin() + static_cast<std::ptrdiff_t>(offset),
                                     d_input.begin() + static_cast<std::ptrdiff_t>(offset) + k_users);
  backward(nets.actor_copy, actor_cache, d_action, *actor_acc);
}

}  // namespace

LossReport kddpg_losses(const TrainingBatch& batch, const Networks& nets, double gamma,
                        ExecPolicy exec, bool with_gradients) {
  check_batch(batch, nets);
  const std::size_t n = batch.items.size();
  const double n_tr = static_cast<double>(n);
  LossReport rep;
  rep.td_errors.resize(n);
  if (with_gradients) {
    rep.critic_grad = MlpParams::zeros(nets.critic_copy.dims(), nets.critic_copy.output);
    rep.actor_grad = MlpParams::zeros(nets.actor_copy.dims(), nets.actor_copy.output);
  }

  std::vector<ItemResult> items(n);
  if (exec == ExecPolicy::kSerial || !with_gradients) {
    parallel_for(exec, static_cast<std::int64_t>(n), [&](std::int64_t i) {
      kddpg_item(*batch.items[i], batch.u[i], n_tr, nets, gamma, with_gradients, items[i],
                 &rep.critic_grad, &rep.actor_grad);
    });
  } else {
    // per-draw gradient buffers, reduced afterwards in draw order; each weight
    // receives one term per draw, so this matches serial accumulation bit for bit
    parallel_for(exec, static_cast<std::int64_t>(n), [&](std::int64_t i) {
      ItemResult& it = items[i];
      it.critic_grad = MlpParams::zeros(nets.critic_copy.dims(), nets.critic_copy.output);
      it.actor_grad = MlpParams::zeros(nets.actor_copy.dims(), nets.actor_copy.output);
      kddpg_item(*batch.items[i], batch.u[i], n_tr, nets, gamma, true, it, &it.critic_grad,
                 &it.actor_grad);
    });
    for (auto& it : items) {
      axpy(rep.critic_grad, it.critic_grad, 1.0);
      axpy(rep.actor_grad, it.actor_grad, 1.0);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    rep.critic_loss += items[i].critic_loss;
    rep.actor_loss += items[i].actor_loss;
    rep.td_errors[i] = std::move(items[i].td);
  }
  return rep;
}

LossReport ddpg_losses(const TrainingBatch& batch, const Networks& nets, double gamma,
                       bool with_gradients) {
  if (nets.critic.output_size() != 1)
    throw std::invalid_argument("ddpg_losses: plain DDPG needs a single-output critic");
  check_batch(batch, nets);
  const double n_tr = static_cast<double>(batch.items.size());
  const std::size_t state_len = batch.items.front()->state.size();
  const int k_users = nets.actor.output_size();

  LossReport rep;
  if (with_gradients) {
    rep.critic_grad = MlpParams::zeros(nets.critic_copy.dims(), nets.critic_copy.output);
    rep.actor_grad = MlpParams::zeros(nets.actor_copy.dims(), nets.actor_copy.output);
  }
  for (const Transition* t : batch.items) {
    double reward = 0.0;
    if (t->reward.size() == 1) {
      reward = t->reward[0];
    } else {
      for (double r : t->reward) reward += r;
    }

    std::vector<double> next_in = t->next_state;
    const std::vector<double> mu_next = forward(nets.actor, t->next_state);
    next_in.insert(next_in.end(), mu_next.begin(), mu_next.end());
    const double y = reward + gamma * forward(nets.critic, next_in)[0];

    std::vector<double> sa = t->state;
    sa.insert(sa.end(), t->action.begin(), t->action.end());
    rep.td_errors.push_back({y - forward(nets.critic, sa)[0]});

    ForwardCache cc;
    const double q = forward(nets.critic_copy, sa, cc)[0];
    rep.critic_loss += (y - q) * (y - q) / n_tr;

    ForwardCache ac;
    std::vector<double> s_mu = t->state;
    const std::vector<double>& mu = forward(nets.actor_copy, t->state, ac);
    s_mu.insert(s_mu.end(), mu.begin(), mu.end());
    ForwardCache pc;
    const double q_mu = forward(nets.critic_copy, s_mu, pc)[0];
    rep.actor_loss += -q_mu / n_tr;

    if (!with_gradients) continue;
    const double dq = -2.0 * (y - q) / n_tr;
    backward(nets.critic_copy, cc, std::span<const double>(&dq, 1), rep.critic_grad);
    const double da = -1.0 / n_tr;
    const std::vector<double> g = input_gradient(nets.critic_copy, pc, std::span<const double>(&da, 1));
    backward(nets.actor_copy, ac,
             std::span<const double>(g.data() + state_len, static_cast<std::size_t>(k_users)),
             rep.actor_grad);
  }
  return rep;
}

Transition make_transition(const NetworkState& state, std::span<const double> action,
                           const StepResult& step, bool shaped, std::int64_t slot) {
  Transition t;
  t.state = state.flatten();
  t.action.assign(action.begin(), action.end());
  t.scheduled.resize(step.scheduled.size());
  for (std::size_t k = 0; k < step.scheduled.size(); ++k)
    t.scheduled[k] = static_cast<std::uint8_t>(step.scheduled[k] != 0);
  t.hol = step.hol_before;
  t.reward = shaped ? step.shaped.per_user : step.reward.per_user;
  t.next_state = step.next_state.flatten();
  t.slot_index = slot;
  return t;
}

SchedulerAction act_greedy(const MlpParams& actor, const NetworkState& state, int n_total) {
  return to_discrete_action(forward(actor, state.flatten()), state.mode, n_total);
}

Trainer::Trainer(const SystemConfig& cfg) : Trainer(cfg, [&] {
        cfg.validate();
        Rng init = SeedTree(cfg.seed).stream("init");
        return Networks::init(cfg, init);
      }()) {}

Trainer::Trainer(const SystemConfig& cfg, Networks init)
    : cfg_(cfg),
      seeds_(cfg.seed),
      env_(cfg, seeds_.child("env")),
      nets_(std::move(init)),
      memory_(static_cast<std::size_t>(cfg.replay_capacity), cfg.initial_weight, cfg.weight_floor),
      actor_opt_(cfg.optimizer, cfg.lr_actor, cfg.momentum),
      critic_opt_(cfg.optimizer, cfg.lr_critic, cfg.momentum),
      noise_(cfg.users, cfg.sigma, cfg.delta),
      explore_rng_(seeds_.stream("exploration")),
      sample_rng_(seeds_.stream("sampling")),
      window_(cfg.users) {
  cfg_.validate();
  if (nets_.actor.dims() != cfg_.actor_dims() || nets_.critic.dims() != cfg_.critic_dims())
    throw std::invalid_argument("Trainer: network shapes do not match the configuration");
}

void Trainer::use_reference_ddpg(bool on) {
  if (on && cfg_.flags.any())
    throw std::logic_error("Trainer: the reference DDPG path needs every K-DDPG flag off");
  reference_ddpg_ = on;
}

void Trainer::remember(const NetworkState& state, std::span<const double> action,
                       const StepResult& step) {
  memory_.push(make_transition(state, action, step, cfg_.flags.reward_shaping, total_slots_));
}

void Trainer::push(Transition t) { memory_.push(std::move(t)); }

LossReport Trainer::train_iteration() {
  const bool is = cfg_.flags.importance_sampling;
  const std::size_t n = static_cast<std::size_t>(cfg_.batch_size);
  const SampledBatch drawn =
      memory_.sample(n, is ? SamplingMode::kPrioritized : SamplingMode::kUniform, sample_rng_);

  TrainingBatch batch;
  batch.items.reserve(n);
  batch.u.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.items.push_back(&memory_.at(drawn.indices[i]));
    batch.u.push_back(is ? bias_weight(drawn.probabilities[i], memory_.size()) : 1.0);
  }
  if (is && cfg_.is_normalization != IsNormalization::kNone) {
    const double scale =
        cfg_.is_normalization == IsNormalization::kBatchMax
            ? *std::max_element(batch.u.begin(), batch.u.end())
            : std::accumulate(batch.u.begin(), batch.u.end(), 0.0) / static_cast<double>(n);
    for (double& u : batch.u) u /= scale;
  }

  LossReport rep = reference_ddpg_ ? ddpg_losses(batch, nets_, cfg_.gamma)
                                   : kddpg_losses(batch, nets_, cfg_.gamma, cfg_.exec);

  if (!std::isfinite(rep.critic_loss) || !std::isfinite(rep.actor_loss) ||
      !rep.critic_grad.all_finite() || !rep.actor_grad.all_finite()) {
    std::ostringstream msg;
    msg << "training diverged at slot " << total_slots_ << ": critic_loss=" << rep.critic_loss
        << " actor_loss=" << rep.actor_loss;
    throw TrainingDiverged(msg.str());
  }

  if (is) {
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& t = *batch.items[i];
      memory_.set_weight(drawn.indices[i],
                         transition_weight(rep.td_errors[i], t.scheduled, t.hol, cfg_.d_min,
                                           cfg_.d_max));
    }
  }

  critic_opt_.step(nets_.critic_copy, rep.critic_grad);
  actor_opt_.step(nets_.actor_copy, rep.actor_grad);
  soft_update(nets_.critic, nets_.critic_copy, cfg_.tau);
  soft_update(nets_.actor, nets_.actor_copy, cfg_.tau);
  return rep;
}

void Trainer::run_episode() {
  env_.reset();
  noise_.reset();
  const int k_users = cfg_.users;
  std::vector<double> action(k_users);
  for (int t = 0; t < cfg_.episode_slots; ++t) {
    const NetworkState state = env_.state();
    const std::vector<double> mu = forward(nets_.actor, state.flatten());
    const std::vector<double>& noise = noise_.next(explore_rng_);
    for (int k = 0; k < k_users; ++k) action[k] = std::clamp(mu[k] + noise[k], 0.0, 1.0);
    const StepResult step = env_.step(to_discrete_action(action, cfg_.mode, cfg_.rbs));
    window_.add(step);
    remember(state, action, step);
    if (memory_.size() >= static_cast<std::size_t>(cfg_.batch_size)) train_iteration();
    ++total_slots_;
  }
}

std::vector<EpisodeMetrics> Trainer::train(
    const std::function<void(const EpisodeMetrics&)>& sink) {
  std::vector<EpisodeMetrics> out;
  const int per_window = std::max(cfg_.metrics_window_episodes, 1);
  window_.clear();
  for (int e = 0; e < cfg_.episodes; ++e) {
    run_episode();
    if ((e + 1) % per_window == 0 || e + 1 == cfg_.episodes) {
      out.push_back(window_.finish(static_cast<int>(out.size())));
      window_.clear();
      if (sink) sink(out.back());
    }
  }
  return out;
}

}  // namespace schedlab
