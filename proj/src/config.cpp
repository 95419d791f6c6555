#include "schedlab/config.hpp"

#include <cmath>

namespace schedlab {

std::vector<int> SystemConfig::actor_dims() const {
  const int k = users;
  return {2 * k, actor_hidden_per_user * k, actor_hidden_per_user * k, k};
}

std::vector<int> SystemConfig::critic_dims() const {
  const int k = users;
  return {3 * k, critic_hidden_per_user * k, critic_hidden_per_user * k, critic_heads()};
}

namespace {

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ConfigError(field, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SystemConfig::validate() const {
  require(std::isfinite(tx_psd_dbm_hz), "tx_psd_dbm_hz", "must be finite");
  require(std::isfinite(noise_psd_dbm_hz), "noise_psd_dbm_hz", "must be finite");
  require(finite_positive(tti_seconds), "tti_seconds", "must be > 0");
  require(finite_positive(rb_bandwidth_hz), "rb_bandwidth_hz", "must be > 0");
  require(rb_bandwidth_hz * tti_seconds > 1.0, "rb_bandwidth_hz",
          "symbols per RB (bandwidth x TTI) must exceed 1");
  require(packet_bytes > 0, "packet_bytes", "must be > 0");
  require(arrival_prob > 0.0 && arrival_prob < 1.0, "arrival_prob", "must lie in (0,1)");
  require(eps_max > 0.0 && eps_max < 0.5, "eps_max", "must lie in (0,0.5)");
  require(d_min >= 1, "d_min", "must be >= 1");
  require(d_max >= d_min, "d_max", "must be >= d_min");
  require(finite_positive(log_snr_max), "log_snr_max", "must be > 0");
  require(finite_positive(snr_log_base) && snr_log_base != 1.0, "snr_log_base",
          "must be > 0 and != 1");
  require(finite_positive(cell_radius_m), "cell_radius_m", "must be > 0");
  require(std::isfinite(user_speed_mps) && user_speed_mps >= 0.0, "user_speed_mps",
          "must be >= 0");
  require(fade_persistence >= 0.0 && fade_persistence <= 1.0, "fade_persistence",
          "must lie in [0,1]");
  require(std::isfinite(rician_k) && rician_k >= 0.0, "rician_k", "must be >= 0");
  require(std::isfinite(snr_offset_db), "snr_offset_db", "must be finite");
  require(std::isfinite(fixed_snr_db), "fixed_snr_db", "must be finite");

  require(std::isfinite(sigma) && sigma >= 0.0, "sigma", "must be >= 0");
  require(std::isfinite(delta) && delta >= 0.0, "delta", "must be >= 0");
  require(finite_positive(lr_actor), "lr_actor", "must be > 0");
  require(finite_positive(lr_critic), "lr_critic", "must be > 0");
  require(tau >= 0.0 && tau <= 1.0, "tau", "must lie in [0,1]");
  require(replay_capacity > 0, "replay_capacity", "must be > 0");
  require(batch_size > 0, "batch_size", "must be > 0");
  require(episode_slots > 0, "episode_slots", "must be > 0");
  require(std::isfinite(psi_min) && std::isfinite(psi_max) && psi_min <= psi_max, "psi_max",
          "must be finite and >= psi_min");
  require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie in (0,1)");
  require(finite_positive(initial_weight), "initial_weight", "must be > 0");
  require(finite_positive(reward_eps_floor) && reward_eps_floor < 1.0, "reward_eps_floor",
          "must be in (0,1)");
  require(finite_positive(weight_floor), "weight_floor", "must be > 0");
  require(actor_hidden_per_user > 0, "actor_hidden_per_user", "must be > 0");
  require(critic_hidden_per_user > 0, "critic_hidden_per_user", "must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0,1)");

  require(std::isfinite(param_noise_v) && param_noise_v >= 0.0, "param_noise_v", "must be >= 0");
  require(std::isfinite(param_noise_lambda) && param_noise_lambda >= 0.0, "param_noise_lambda",
          "must be >= 0");
  require(upload_batch > 0, "upload_batch", "must be > 0");
  require(std::isfinite(d_other_seconds) && d_other_seconds >= 0.0, "d_other_seconds",
          "must be >= 0");

  require(users > 0, "users", "must be > 0");
  require(rbs >= 0, "rbs", "must be >= 0");
  require(episodes >= 0, "episodes", "must be >= 0");
  require(metrics_window_episodes > 0, "metrics_window_episodes", "must be > 0");
}

const char* to_string(Mode m) {
  return m == Mode::kTdrl ? "tdrl" : "straightforward";
}

Mode parse_mode(const std::string& s) {
  if (s == "tdrl") return Mode::kTdrl;
  if (s == "straightforward") return Mode::kStraightforward;
  throw ConfigError("mode", "expected 'straightforward' or 'tdrl', got '" + s + "'");
}

}  // namespace schedlab
