#pragma once

// Stochastic environment physics: mobility, path loss, persistent Rician
// fading, Bernoulli arrivals and FIFO queues with head-of-line delay.

#include <cstdint>
#include <deque>

#include "schedlab/config.hpp"
#include "schedlab/rng.hpp"

namespace schedlab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  double norm() const;
};

struct RadioParams {
  double tx_psd_dbm_hz = 20.0;
  double noise_psd_dbm_hz = -90.0;
  double tti_seconds = 125e-6;
  double cell_radius_m = 100.0;
  double speed_mps = 5.0;
  double fade_persistence = 0.8;
  double rician_k = 0.6;  // LoS power / total NLoS power, linear
  double snr_offset_db = 0.0;
  double min_distance_m = 1.0;

  static RadioParams from(const SystemConfig& cfg);
};

/// 45 + 30 log10(l) dB, with l clamped below at 1 m.
double path_loss_db(double distance_m);

/// Linear SNR for a user at `distance_m` with small-scale power gain `gain`.
double snr_linear(const RadioParams& rp, double distance_m, double gain);

/// Rician envelope |h| with E|h|^2 = 1.
double draw_rician_amplitude(double k_factor, Rng& rng);

/// Closed-form E|h| for the unit-power Rician envelope.
double rician_amplitude_mean(double k_factor);

struct UserChannel {
  Vec2 position;
  Vec2 velocity;
  double small_scale_gain = 1.0;  // power gain |h|^2
  double snr_linear = 1.0;
};

/// Uniform position in the cell, uniform heading, fresh fade.
UserChannel spawn_channel(const RadioParams& rp, Rng& rng);

/// One slot: fade persists with probability fade_persistence, otherwise it is
/// redrawn; the user moves with specular reflection at the cell edge.
UserChannel step_channel(const UserChannel& ch, const RadioParams& rp, Rng& rng);

struct QueueStep {
  int lost = 0;
  int delivered = 0;  // departed in window with a successful decode
  int arrived = 0;
};

class UserQueue {
 public:
  UserQueue(double arrival_prob, int d_min, int d_max);

  /// HoL delay in slots at `slot`; 0 for an empty queue.
  int hol_delay(std::int64_t slot) const;
  bool empty() const { return packets_.empty(); }
  std::size_t size() const { return packets_.size(); }
  double arrival_prob() const { return arrival_prob_; }
  int d_min() const { return d_min_; }
  int d_max() const { return d_max_; }
  void clear() { packets_.clear(); }

  /// Advance through `slot`. Service (or discard at D_max) happens first; the
  /// Bernoulli arrival lands at the end of the slot, stamped `slot`.
  /// Throws std::logic_error when scheduling an empty queue.
  QueueStep step(std::int64_t slot, bool scheduled, bool tx_success, Rng& arrivals);

 private:
  double arrival_prob_;
  int d_min_;
  int d_max_;
  std::deque<std::int64_t> packets_;
};

/// Closed-form HoL transition probability Pr{d(t+1)=j | d(t)=i, x(t)}.
/// Throws std::domain_error for i or j outside [0, d_max] or scheduled with i=0.
double hol_transition_prob(int i, int j, bool scheduled, double p, int d_max);

}  // namespace schedlab
