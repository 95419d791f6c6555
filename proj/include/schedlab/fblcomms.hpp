#pragma once

// Finite-blocklength link math: normal approximation of the decoding error
// probability of a short packet over a flat, quasi-static channel, and the
// minimum number of resource blocks meeting a reliability target.

namespace schedlab {

/// Smallest probability the link model ever reports. Tail probabilities below
/// it are clamped so that log-rewards stay finite (-ln(kProbabilityFloor) ~ 690.8).
inline constexpr double kProbabilityFloor = 1e-300;

struct LinkParams {
  int packet_bits = 256;          // L
  double rb_bandwidth_hz = 180e3; // W
  double tti_seconds = 125e-6;    // slot duration
  double snr_linear = 1.0;        // phi
  double eps_max = 1e-5;          // reliability target
  int n_total = 50;               // RBs available

  double symbols_per_rb() const { return rb_bandwidth_hz * tti_seconds; }

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

/// Upper-tail probability of the standard normal, clamped below at
/// kProbabilityFloor. Throws std::domain_error for non-finite input.
double q_function(double x);

/// V = 1 - 1/(1+snr)^2. Throws std::domain_error for snr <= 0.
double channel_dispersion(double snr_linear);

/// Decoding error probability with n_rb resource blocks, strictly inside (0,1).
/// Throws std::invalid_argument when n_rb < 1.
double decoding_error(const LinkParams& link, int n_rb);

struct MinRbs {
  int n_star = 0;
  bool feasible = false;
  bool operator==(const MinRbs&) const = default;
};

/// Smallest n in [1, n_total] with decoding_error(n) <= eps_max, by binary
/// search. Returns {n_total, false} when even n_total misses the target.
MinRbs min_rbs(const LinkParams& link);

}  // namespace schedlab
