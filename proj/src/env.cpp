#include "schedlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace schedlab {

std::vector<double> NetworkState::flatten() const {
  std::vector<double> out;
  out.reserve(hol_norm.size() + second_half.size());
  out.insert(out.end(), hol_norm.begin(), hol_norm.end());
  out.insert(out.end(), second_half.begin(), second_half.end());
  return out;
}

double RewardVector::total() const { return std::accumulate(per_user.begin(), per_user.end(), 0.0); }

std::vector<int> allocate_rbs(std::span<const int> x, std::span<const int> n_star, int n_total) {
  if (x.size() != n_star.size()) throw std::invalid_argument("allocate_rbs: length mismatch");
  std::int64_t requested = 0;
  for (std::size_t k = 0; k < x.size(); ++k) requested += static_cast<std::int64_t>(x[k]) * n_star[k];
  std::vector<int> out(x.size(), 0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::int64_t want = static_cast<std::int64_t>(x[k]) * n_star[k];
    out[k] = requested <= n_total ? static_cast<int>(want)
                                  : static_cast<int>(want * n_total / requested);
  }
  return out;
}

double log_reward(double r_tilde) { return -std::log1p(-r_tilde); }

double user_reward_tdrl(int d, bool scheduled, double eps, const QosWindow& w) {
  if (!scheduled || !w.contains(d)) return 0.0;
  // -ln(1 - (1 - eps)) evaluated as -ln(eps) to keep tiny eps exact
  return -std::log(std::max(eps, kProbabilityFloor));
}

int user_reward_straightforward(int d, bool scheduled, bool decode_ok, const QosWindow& w) {
  return scheduled && w.contains(d) && decode_ok ? 1 : 0;
}

double potential(int d, const PotentialParams& pp) {
  const int ramp = std::min(std::max(d, 0), pp.d_min);
  return pp.psi_min + (pp.psi_max - pp.psi_min) * static_cast<double>(ramp) / pp.d_min;
}

double shape_reward(double r_hat, int d_now, int d_next, double gamma, const PotentialParams& pp) {
  return r_hat - potential(d_now, pp) + gamma * potential(d_next, pp);
}

QosWindow window_of(const SystemConfig& cfg) { return {cfg.d_min, cfg.d_max}; }

PotentialParams potential_of(const SystemConfig& cfg) {
  return {cfg.psi_min, cfg.psi_max, cfg.d_min};
}

Environment::Environment(const SystemConfig& cfg, const SeedTree& seeds)
    : cfg_(cfg),
      radio_(RadioParams::from(cfg)),
      window_(window_of(cfg)),
      potential_(potential_of(cfg)),
      channel_rng_(seeds.stream("channel")),
      arrival_rng_(seeds.stream("arrivals")),
      decode_rng_(seeds.stream("decode")) {
  cfg_.validate();
  queues_.assign(cfg_.users, UserQueue(cfg_.arrival_prob, cfg_.d_min, cfg_.d_max));
  channels_.resize(cfg_.users);
  reset();
}

LinkParams Environment::link_for(int user) const {
  LinkParams lp;
  lp.packet_bits = cfg_.packet_bits();
  lp.rb_bandwidth_hz = cfg_.rb_bandwidth_hz;
  lp.tti_seconds = cfg_.tti_seconds;
  lp.snr_linear = channels_[user].snr_linear;
  lp.eps_max = cfg_.eps_max;
  lp.n_total = std::max(cfg_.rbs, 1);
  return lp;
}

const NetworkState& Environment::reset() {
  slot_ = 0;
  for (auto& q : queues_) q.clear();
  for (auto& ch : channels_) {
    if (cfg_.channel_model == ChannelModel::kFixed) {
      ch = UserChannel{};
      ch.snr_linear = std::pow(10.0, (cfg_.fixed_snr_db + cfg_.snr_offset_db) / 10.0);
    } else {
      ch = spawn_channel(radio_, channel_rng_);
    }
  }
  observe();
  return state_;
}

int Environment::backlog() const {
  int n = 0;
  for (const auto& q : queues_) n += static_cast<int>(q.size());
  return n;
}

void Environment::observe() {
  const int k_users = cfg_.users;
  hol_.resize(k_users);
  n_star_.resize(k_users);
  state_.mode = cfg_.mode;
  state_.hol_norm.resize(k_users);
  state_.second_half.resize(k_users);
  const double log_snr_max = cfg_.log_snr_max * std::log(cfg_.snr_log_base);
  for (int k = 0; k < k_users; ++k) {
    hol_[k] = queues_[k].hol_delay(slot_);
    state_.hol_norm[k] = static_cast<double>(hol_[k]) / cfg_.d_max;
    if (cfg_.rbs > 0) {
      n_star_[k] = min_rbs(link_for(k)).n_star;
    } else {
      n_star_[k] = 1;
    }
    if (cfg_.mode == Mode::kTdrl) {
      state_.second_half[k] =
          cfg_.rbs > 0 ? static_cast<double>(n_star_[k]) / cfg_.rbs : 1.0;
    } else {
      const double ratio = std::log(channels_[k].snr_linear) / log_snr_max;
      state_.second_half[k] = std::clamp(ratio, 0.0, 1.0);
    }
  }
}

StepResult Environment::step(const SchedulerAction& action) {
  const int k_users = cfg_.users;
  if (action.mode != cfg_.mode)
    throw std::invalid_argument("Environment::step: action mode does not match environment");
  if (static_cast<int>(action.values.size()) != k_users)
    throw std::invalid_argument("Environment::step: action has " +
                                std::to_string(action.values.size()) + " entries, expected " +
                                std::to_string(k_users));

  StepResult out;
  out.hol_before = hol_;
  std::vector<int> request(k_users, 0);
  for (int k = 0; k < k_users; ++k) {
    int v = action.values[k];
    if (cfg_.mode == Mode::kTdrl) {
      if (v != 0 && v != 1) throw std::invalid_argument("Environment::step: T-DRL action must be 0/1");
    } else if (v < 0 || v > cfg_.rbs) {
      throw std::invalid_argument("Environment::step: RB count outside [0, N]");
    }
    if (v != 0 && queues_[k].empty()) {
      ++out.masked;
      v = 0;
    }
    request[k] = v;
  }

  if (cfg_.mode == Mode::kTdrl) {
    out.allocated = allocate_rbs(request, n_star_, cfg_.rbs);
  } else {
    std::vector<int> flags(k_users);
    for (int k = 0; k < k_users; ++k) flags[k] = request[k] > 0 ? 1 : 0;
    // same proportional floor as T-DRL, with the requested counts as demand
    out.allocated = allocate_rbs(flags, request, cfg_.rbs);
  }

  out.scheduled.assign(k_users, 0);
  out.reward.per_user.assign(k_users, 0.0);
  out.shaped.per_user.assign(k_users, 0.0);
  out.shaped.shaped = true;
  out.losses.assign(k_users, 0);
  out.arrivals.assign(k_users, 0);
  out.deliveries.assign(k_users, 0);

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < k_users; ++k) {
    const bool sched = out.allocated[k] > 0;
    out.scheduled[k] = sched ? 1 : 0;
    bool decode_ok = false;
    double eps = 1.0;
    if (sched) {
      eps = decoding_error(link_for(k), out.allocated[k]);
      decode_ok = u01(decode_rng_) >= eps;
    }
    out.reward.per_user[k] =
        cfg_.mode == Mode::kTdrl
            ? user_reward_tdrl(hol_[k], sched, std::max(eps, cfg_.reward_eps_floor), window_)
            : static_cast<double>(user_reward_straightforward(hol_[k], sched, decode_ok, window_));
    const QueueStep qs = queues_[k].step(slot_, sched, decode_ok, arrival_rng_);
    out.losses[k] = qs.lost;
    out.arrivals[k] = qs.arrived;
    out.deliveries[k] = qs.delivered;
  }

  if (cfg_.channel_model == ChannelModel::kMobileRician) {
    for (auto& ch : channels_) ch = step_channel(ch, radio_, channel_rng_);
  }
  ++slot_;
  observe();

  out.hol_after = hol_;
  for (int k = 0; k < k_users; ++k) {
    out.shaped.per_user[k] =
        shape_reward(out.reward.per_user[k], out.hol_before[k], out.hol_after[k], cfg_.gamma,
                     potential_);
  }
  out.next_state = state_;
  return out;
}

}  // namespace schedlab
