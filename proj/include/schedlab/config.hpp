#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace schedlab {

enum class Mode { kStraightforward, kTdrl };

enum class ChannelModel {
  kMobileRician,  // random positions, 5 m/s mobility, persistent Rician fading
  kFixed,         // every user sees fixed_snr_db, no fading
};

/// Execution policy for the data-parallel kernels. Both policies produce
/// bit-identical results; kSerial is the reference.
enum class ExecPolicy { kSerial, kParallel };

enum class OptimizerKind { kSgd, kMomentum };

/// Scaling of the importance-sampling corrections u = 1/(p |I|) in a batch.
/// kNone uses them as is; kBatchMax divides by the batch maximum; kBatchMean
/// divides by the batch mean (self-normalized estimator).
enum class IsNormalization { kNone, kBatchMax, kBatchMean };

struct TrainerFlags {
  bool multi_head = false;
  bool reward_shaping = false;
  bool importance_sampling = false;

  bool any() const { return multi_head || reward_shaping || importance_sampling; }
  bool operator==(const TrainerFlags&) const = default;
};

/// Field-level configuration failure. `field` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Every simulation and learning constant. Defaults reproduce the reference
/// setup (K=5 users, N=50 RBs).
struct SystemConfig {
  // radio
  double tx_psd_dbm_hz = 20.0;
  double noise_psd_dbm_hz = -90.0;
  double tti_seconds = 125e-6;
  double rb_bandwidth_hz = 180e3;
  int packet_bytes = 32;
  double arrival_prob = 0.1;
  double eps_max = 1e-5;
  int d_min = 5;
  int d_max = 7;
  double log_snr_max = 3.8;
  double snr_log_base = 2.718281828459045;  // base of log_snr_max
  double cell_radius_m = 100.0;
  double user_speed_mps = 5.0;
  double fade_persistence = 0.8;
  double rician_k = 0.6;
  double snr_offset_db = 0.0;  // global perturbation applied on top of path loss
  ChannelModel channel_model = ChannelModel::kMobileRician;
  double fixed_snr_db = 16.5;
  /// Lower bound on the decoding error inside the T-DRL reward, which caps
  /// the per-user reward at -ln(reward_eps_floor).
  double reward_eps_floor = 1e-9;

  // learning
  double sigma = 1.0;
  double delta = 0.4;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double tau = 1e-3;
  int replay_capacity = 10000;
  int batch_size = 20;
  int episode_slots = 200;
  double psi_min = 0.0;
  double psi_max = 1.0;
  double gamma = 0.9;
  double initial_weight = 1e-3;
  double weight_floor = 1e-8;
  IsNormalization is_normalization = IsNormalization::kBatchMean;
  int actor_hidden_per_user = 20;
  int critic_hidden_per_user = 30;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;

  // online
  double param_noise_v = 0.1;
  double param_noise_lambda = 5e4;
  int upload_batch = 32;
  double d_other_seconds = 4e-3;

  // experiment
  int users = 5;
  int rbs = 50;
  std::uint64_t seed = 1;
  Mode mode = Mode::kTdrl;
  TrainerFlags flags{};
  int episodes = 100;
  int metrics_window_episodes = 5;
  ExecPolicy exec = ExecPolicy::kSerial;

  int packet_bits() const { return packet_bytes * 8; }
  std::vector<int> actor_dims() const;
  std::vector<int> critic_dims() const;
  int critic_heads() const { return flags.multi_head ? users : 1; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  bool operator==(const SystemConfig&) const = default;
};

const char* to_string(Mode m);
Mode parse_mode(const std::string& s);

}  // namespace schedlab
