#pragma once

// Independent reference computations used by the tests, the acceptance
// binary and `schedlab oracle`. Nothing in the library depends on them.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/drl.hpp"
#include "schedlab/env.hpp"
#include "schedlab/fblcomms.hpp"

namespace schedlab::oracle {

// ---- finite blocklength ----------------------------------------------------

/// Linear scan n = 1..N for the first n meeting eps_max.
MinRbs min_rbs_scan(const LinkParams& link);

/// Normal-approximation decoding error evaluated in 50-digit arithmetic,
/// without the probability floor.
long double decoding_error_hp(const LinkParams& link, int n_rb);
long double q_function_hp(long double x);

struct BlocklengthReport {
  int draws = 0;
  int scan_mismatches = 0;
  int monotone_n_violations = 0;
  int monotone_snr_violations = 0;
  double max_rel_error_vs_hp = 0.0;  // over draws where eps > 1e-250
};

/// Random links (SNR, N, L, eps_max) compared against the exhaustive scan,
/// plus monotonicity of the decoding error in n and in SNR.
BlocklengthReport blocklength_suite(int draws, std::uint64_t seed);

// ---- HoL Markov chain ------------------------------------------------------

struct MarkovCounts {
  int d_max = 0;
  // counts[x][i][j], x = scheduled
  std::vector<std::vector<std::vector<std::int64_t>>> counts;
  std::int64_t slots = 0;

  std::int64_t row_total(int x, int i) const;
  double frequency(int x, int i, int j) const;
  bool operator==(const MarkovCounts&) const = default;
};

/// Simulates `chains` independent single-user queues of `slots_per_chain`
/// slots each under a random scheduling policy, tallying HoL transitions.
/// Chain c draws from SeedTree(seed).stream("markov", c); the totals are the
/// same for either execution policy.
MarkovCounts markov_counts(double p, int d_min, int d_max, int chains, std::int64_t slots_per_chain,
                           std::uint64_t seed, ExecPolicy exec);

struct MarkovReport {
  double max_abs_error = 0.0;
  double max_row_sum_error = 0.0;
  std::int64_t min_row_visits = 0;
  std::int64_t slots = 0;
};

/// Runs chains until every feasible (i, x) row has at least min_row_visits.
MarkovReport markov_suite(double p, int d_min, int d_max, std::int64_t min_row_visits,
                          std::uint64_t seed, ExecPolicy exec);

// ---- tabular single-user MDP -----------------------------------------------

struct TabularMdp {
  int d_min = 5;
  int d_max = 7;
  double p = 0.1;
  double gamma = 0.9;
  double eps = 1e-5;  // fixed decoding error when scheduled
  PotentialParams potential{};
};

struct TabularSolution {
  std::vector<std::array<double, 2>> q;  // q[d][x]
  std::vector<int> greedy;               // argmax_x, ties to 0
};

/// Value iteration to a sup-norm change below `tol`. With `shaped`, rewards
/// are r - Psi(d) + gamma Psi(d').
TabularSolution value_iteration(const TabularMdp& mdp, bool shaped, double tol = 1e-13);

/// Policy evaluation of a fixed policy, per-user Q under reward r (or the
/// summed reward of `users` identical independent users).
std::vector<std::array<double, 2>> policy_q(const TabularMdp& mdp, const std::vector<int>& policy,
                                            bool shaped, double tol = 1e-13);

struct ShapingReport {
  bool same_policy = false;
  double max_q_offset_error = 0.0;  // max |Q_shaped - (Q - Psi)|
};
ShapingReport shaping_suite(const TabularMdp& mdp);

// ---- gradients -------------------------------------------------------------

struct LayerError {
  std::string name;  // e.g. "critic.L1.weights"
  double rel_error = 0.0;
};

struct GradientReport {
  std::vector<LayerError> layers;
  double max_rel_error = 0.0;
};

/// Central finite differences of the K-DDPG critic and actor losses against
/// the analytic gradients, per layer: ||fd - an|| / max(||fd||, ||an||).
/// Covers every parameter; the batch is synthetic with random u factors.
GradientReport gradient_suite(int users, int heads, int batch, std::uint64_t seed, double h = 1e-6);

// ---- replay ----------------------------------------------------------------

struct ReplayReport {
  double max_freq_error = 0.0;      // |empirical - w/sum w| over slots
  double unbiased_rel_error = 0.0;  // |weighted mean - uniform mean| / |uniform mean|
};

ReplayReport replay_suite(std::size_t size, std::size_t draws, std::uint64_t seed);

}  // namespace schedlab::oracle
