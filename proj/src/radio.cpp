#include "schedlab/radio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace schedlab {

double Vec2::norm() const { return std::hypot(x, y); }

RadioParams RadioParams::from(const SystemConfig& cfg) {
  RadioParams rp;
  rp.tx_psd_dbm_hz = cfg.tx_psd_dbm_hz;
  rp.noise_psd_dbm_hz = cfg.noise_psd_dbm_hz;
  rp.tti_seconds = cfg.tti_seconds;
  rp.cell_radius_m = cfg.cell_radius_m;
  rp.speed_mps = cfg.user_speed_mps;
  rp.fade_persistence = cfg.fade_persistence;
  rp.rician_k = cfg.rician_k;
  rp.snr_offset_db = cfg.snr_offset_db;
  return rp;
}

double path_loss_db(double distance_m) {
  return 45.0 + 30.0 * std::log10(std::max(distance_m, 1.0));
}

double snr_linear(const RadioParams& rp, double distance_m, double gain) {
  const double d = std::max(distance_m, rp.min_distance_m);
  const double snr_db =
      rp.tx_psd_dbm_hz - rp.noise_psd_dbm_hz - path_loss_db(d) + rp.snr_offset_db;
  const double snr = std::pow(10.0, snr_db / 10.0) * gain;
  return std::max(snr, 1e-300);
}

double draw_rician_amplitude(double k_factor, Rng& rng) {
  const double los = std::sqrt(k_factor / (k_factor + 1.0));
  const double sigma = std::sqrt(0.5 / (k_factor + 1.0));
  std::normal_distribution<double> n01(0.0, 1.0);
  const double re = los + sigma * n01(rng);
  const double im = sigma * n01(rng);
  return std::hypot(re, im);
}

double rician_amplitude_mean(double k_factor) {
  // E|h| = sigma sqrt(pi/2) L_{1/2}(-K), with 2 sigma^2 = 1/(K+1)
  const double sigma = std::sqrt(0.5 / (k_factor + 1.0));
  const double half = k_factor / 2.0;
  const double laguerre = std::exp(-half) * ((1.0 + k_factor) * std::cyl_bessel_i(0.0, half) +
                                             k_factor * std::cyl_bessel_i(1.0, half));
  return sigma * std::sqrt(std::numbers::pi / 2.0) * laguerre;
}

namespace {

double fade_gain(double k_factor, Rng& rng) {
  const double a = draw_rician_amplitude(k_factor, rng);
  return a * a;
}

void refresh_snr(UserChannel& ch, const RadioParams& rp) {
  ch.snr_linear = snr_linear(rp, ch.position.norm(), ch.small_scale_gain);
}

}  // namespace

UserChannel spawn_channel(const RadioParams& rp, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double r = rp.cell_radius_m * std::sqrt(u01(rng));
  const double theta = 2.0 * std::numbers::pi * u01(rng);
  const double heading = 2.0 * std::numbers::pi * u01(rng);
  UserChannel ch;
  ch.position = {r * std::cos(theta), r * std::sin(theta)};
  ch.velocity = {rp.speed_mps * std::cos(heading), rp.speed_mps * std::sin(heading)};
  ch.small_scale_gain = fade_gain(rp.rician_k, rng);
  refresh_snr(ch, rp);
  return ch;
}

UserChannel step_channel(const UserChannel& ch, const RadioParams& rp, Rng& rng) {
  UserChannel next = ch;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) >= rp.fade_persistence) next.small_scale_gain = fade_gain(rp.rician_k, rng);

  const double radius = rp.cell_radius_m;
  double remaining = rp.tti_seconds;
  for (int bounce = 0; bounce < 8 && remaining > 0.0; ++bounce) {
    const Vec2 p = next.position;
    const Vec2 v = next.velocity;
    const Vec2 end{p.x + v.x * remaining, p.y + v.y * remaining};
    if (end.norm() <= radius) {
      next.position = end;
      remaining = 0.0;
      break;
    }
    // first time s in (0, remaining] with |p + v s| = R
    const double a = v.x * v.x + v.y * v.y;
    const double b = 2.0 * (p.x * v.x + p.y * v.y);
    const double c = p.x * p.x + p.y * p.y - radius * radius;
    const double disc = std::max(b * b - 4.0 * a * c, 0.0);
    const double s = std::clamp((-b + std::sqrt(disc)) / (2.0 * a), 0.0, remaining);
    Vec2 hit{p.x + v.x * s, p.y + v.y * s};
    const double hn = hit.norm();
    const Vec2 n{hit.x / hn, hit.y / hn};
    hit = {n.x * radius, n.y * radius};
    const double vn = v.x * n.x + v.y * n.y;
    next.velocity = {v.x - 2.0 * vn * n.x, v.y - 2.0 * vn * n.y};
    next.position = hit;
    remaining -= s;
  }
  const double r = next.position.norm();
  if (r > radius) next.position = {next.position.x * radius / r, next.position.y * radius / r};
  refresh_snr(next, rp);
  return next;
}

UserQueue::UserQueue(double arrival_prob, int d_min, int d_max)
    : arrival_prob_(arrival_prob), d_min_(d_min), d_max_(d_max) {
  if (!(arrival_prob > 0.0 && arrival_prob < 1.0))
    throw std::invalid_argument("UserQueue: arrival_prob must lie in (0,1)");
  if (d_min < 0 || d_max < d_min) throw std::invalid_argument("UserQueue: need 0 <= d_min <= d_max");
}

int UserQueue::hol_delay(std::int64_t slot) const {
  if (packets_.empty()) return 0;
  return static_cast<int>(slot - packets_.front());
}

QueueStep UserQueue::step(std::int64_t slot, bool scheduled, bool tx_success, Rng& arrivals) {
  QueueStep out;
  const int d = hol_delay(slot);
  if (scheduled) {
    if (packets_.empty()) throw std::logic_error("UserQueue: scheduled an empty queue");
    const bool in_window = d >= d_min_ && d <= d_max_;
    if (in_window && tx_success)
      out.delivered = 1;
    else
      out.lost = 1;
    packets_.pop_front();
  } else if (!packets_.empty() && d >= d_max_) {
    out.lost = 1;
    packets_.pop_front();
  }
  std::bernoulli_distribution arrive(arrival_prob_);
  if (arrive(arrivals)) {
    packets_.push_back(slot);
    out.arrived = 1;
  }
  return out;
}

double hol_transition_prob(int i, int j, bool scheduled, double p, int d_max) {
  if (i < 0 || i > d_max || j < 0 || j > d_max)
    throw std::domain_error("hol_transition_prob: state out of range [0, " +
                            std::to_string(d_max) + "]");
  if (scheduled && i == 0) throw std::domain_error("hol_transition_prob: empty queue scheduled");
  // departure (service or discard) from HoL delay `from`
  auto after_departure = [&](int from) {
    if (j == 0) return std::pow(1.0 - p, from);
    if (j <= from) return p * std::pow(1.0 - p, from - j);
    return 0.0;
  };
  if (scheduled) return after_departure(i);
  if (i == 0) return j == 1 ? p : (j == 0 ? 1.0 - p : 0.0);
  if (i < d_max) return j == i + 1 ? 1.0 : 0.0;
  return after_departure(d_max);
}

}  // namespace schedlab
