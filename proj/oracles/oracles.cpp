#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "schedlab/parallel.hpp"
#include "schedlab/radio.hpp"
#include "schedlab/replay.hpp"
#include "schedlab/rng.hpp"

namespace schedlab::oracle {

namespace mp = boost::multiprecision;
using hp_float = mp::cpp_bin_float_50;

MinRbs min_rbs_scan(const LinkParams& link) {
  for (int n = 1; n <= link.n_total; ++n)
    if (decoding_error(link, n) <= link.eps_max) return {n, true};
  return {link.n_total, false};
}

long double q_function_hp(long double x) {
  const hp_float hx(x);
  const hp_float q = hp_float(0.5) * mp::erfc(hx / mp::sqrt(hp_float(2)));
  return q.convert_to<long double>();
}

long double decoding_error_hp(const LinkParams& link, int n_rb) {
  const hp_float phi(link.snr_linear);
  const hp_float n = hp_float(link.rb_bandwidth_hz) * hp_float(link.tti_seconds) * n_rb;
  const hp_float one(1);
  const hp_float v = one - one / ((one + phi) * (one + phi));
  const hp_float num = -hp_float(link.packet_bits) * mp::log(hp_float(2)) + n * mp::log1p(phi);
  const hp_float x = num / mp::sqrt(n * v);
  const hp_float q = hp_float(0.5) * mp::erfc(x / mp::sqrt(hp_float(2)));
  return q.convert_to<long double>();
}

BlocklengthReport blocklength_suite(int draws, std::uint64_t seed) {
  Rng rng = SeedTree(seed).stream("blocklength");
  std::uniform_real_distribution<double> snr_db(-10.0, 35.0);
  std::uniform_int_distribution<int> n_total(1, 100);
  std::uniform_int_distribution<int> bytes(1, 128);
  std::uniform_real_distribution<double> log_eps(-9.0, -1.5);
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  auto interior = [&](double e) { return e > kProbabilityFloor && e < kBelowOne; };

  BlocklengthReport rep;
  rep.draws = draws;
  for (int d = 0; d < draws; ++d) {
    LinkParams link;
    link.snr_linear = std::pow(10.0, snr_db(rng) / 10.0);
    link.n_total = n_total(rng);
    link.packet_bits = 8 * bytes(rng);
    link.eps_max = std::pow(10.0, log_eps(rng));
    if (!(min_rbs(link) == min_rbs_scan(link))) ++rep.scan_mismatches;

    const LinkParams better = [&] {
      LinkParams b = link;
      b.snr_linear *= 1.05;
      return b;
    }();
    for (int n = 1; n <= link.n_total; ++n) {
      const double e = decoding_error(link, n);
      if (n < link.n_total) {
        const double next = decoding_error(link, n + 1);
        const bool ok = (interior(e) || interior(next)) ? next < e : next <= e;
        if (!ok) ++rep.monotone_n_violations;
      }
      const double eb = decoding_error(better, n);
      const bool ok_snr = (interior(e) || interior(eb)) ? eb < e : eb <= e;
      if (!ok_snr) ++rep.monotone_snr_violations;
      const long double ref = decoding_error_hp(link, n);
      if (ref > 1e-250L && ref < 0.999L) {
        const double rel = static_cast<double>(std::fabs((static_cast<long double>(e) - ref) / ref));
        rep.max_rel_error_vs_hp = std::max(rep.max_rel_error_vs_hp, rel);
      }
    }
  }
  return rep;
}

std::int64_t MarkovCounts::row_total(int x, int i) const {
  std::int64_t s = 0;
  for (std::int64_t c : counts[x][i]) s += c;
  return s;
}

double MarkovCounts::frequency(int x, int i, int j) const {
  const std::int64_t t = row_total(x, i);
  return t > 0 ? static_cast<double>(counts[x][i][j]) / static_cast<double>(t) : 0.0;
}

namespace {

MarkovCounts empty_counts(int d_max) {
  MarkovCounts m;
  m.d_max = d_max;
  m.counts.assign(2, std::vector<std::vector<std::int64_t>>(
                         d_max + 1, std::vector<std::int64_t>(d_max + 1, 0)));
  return m;
}

void add_counts(MarkovCounts& into, const MarkovCounts& from) {
  for (int x = 0; x < 2; ++x)
    for (int i = 0; i <= into.d_max; ++i)
      for (int j = 0; j <= into.d_max; ++j) into.counts[x][i][j] += from.counts[x][i][j];
  into.slots += from.slots;
}

MarkovCounts run_chain(double p, int d_min, int d_max, std::int64_t slots, Rng rng) {
  MarkovCounts m = empty_counts(d_max);
  UserQueue q(p, d_min, d_max);
  Rng arrivals(rng());
  // rarely schedule below D_max so that the long-delay rows get visited too
  std::bernoulli_distribution early(0.15);
  std::bernoulli_distribution late(0.5);
  int d = 0;
  for (std::int64_t s = 0; s < slots; ++s) {
    const bool x = d > 0 && (d < d_max ? early(rng) : late(rng));
    q.step(s, x, true, arrivals);
    const int next = q.hol_delay(s + 1);
    ++m.counts[x ? 1 : 0][d][next];
    d = next;
  }
  m.slots = slots;
  return m;
}

std::int64_t min_feasible_row(const MarkovCounts& m) {
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  for (int i = 0; i <= m.d_max; ++i) {
    lo = std::min(lo, m.row_total(0, i));
    if (i > 0) lo = std::min(lo, m.row_total(1, i));
  }
  return lo;
}

}  // namespace

MarkovCounts markov_counts(double p, int d_min, int d_max, int chains, std::int64_t slots_per_chain,
                           std::uint64_t seed, ExecPolicy exec) {
  const SeedTree tree(seed);
  std::vector<MarkovCounts> parts(chains);
  parallel_for(exec, chains, [&](std::int64_t c) {
    parts[c] = run_chain(p, d_min, d_max, slots_per_chain,
                         tree.stream("markov", static_cast<std::uint64_t>(c)));
  });
  MarkovCounts total = empty_counts(d_max);
  for (const auto& part : parts) add_counts(total, part);
  return total;
}

MarkovReport markov_suite(double p, int d_min, int d_max, std::int64_t min_row_visits,
                          std::uint64_t seed, ExecPolicy exec) {
  constexpr std::int64_t kChainSlots = 1'000'000;
  const int per_round = std::max(1, max_threads());
  MarkovCounts total = empty_counts(d_max);
  const SeedTree tree(seed);
  for (int round = 0; min_feasible_row(total) < min_row_visits; ++round) {
    if (round > 10000) throw std::runtime_error("markov_suite: rows are not being visited");
    add_counts(total, markov_counts(p, d_min, d_max, per_round, kChainSlots,
                                    tree.child("round", static_cast<std::uint64_t>(round)).master(),
                                    exec));
  }
  MarkovReport rep;
  rep.slots = total.slots;
  rep.min_row_visits = min_feasible_row(total);
  for (int x = 0; x < 2; ++x) {
    for (int i = x; i <= d_max; ++i) {
      double row = 0.0;
      for (int j = 0; j <= d_max; ++j) {
        const double pr = hol_transition_prob(i, j, x == 1, p, d_max);
        row += pr;
        rep.max_abs_error = std::max(rep.max_abs_error, std::fabs(pr - total.frequency(x, i, j)));
      }
      rep.max_row_sum_error = std::max(rep.max_row_sum_error, std::fabs(row - 1.0));
    }
  }
  return rep;
}

namespace {

double expected_return(const TabularMdp& mdp, int d, int x, bool shaped,
                       const std::vector<double>& v) {
  const QosWindow w{mdp.d_min, mdp.d_max};
  const bool sched = x == 1 && d > 0;  // scheduling an empty queue is a no-op
  const double r = user_reward_tdrl(d, sched, mdp.eps, w);
  double total = 0.0;
  for (int j = 0; j <= mdp.d_max; ++j) {
    const double pr = hol_transition_prob(d, j, sched, mdp.p, mdp.d_max);
    if (pr == 0.0) continue;
    const double reward = shaped ? shape_reward(r, d, j, mdp.gamma, mdp.potential) : r;
    total += pr * (reward + mdp.gamma * v[j]);
  }
  return total;
}

}  // namespace

TabularSolution value_iteration(const TabularMdp& mdp, bool shaped, double tol) {
  const int states = mdp.d_max + 1;
  std::vector<double> v(states, 0.0);
  TabularSolution sol;
  sol.q.assign(states, {0.0, 0.0});
  for (int iter = 0; iter < 100000; ++iter) {
    double change = 0.0;
    for (int d = 0; d < states; ++d)
      for (int x = 0; x < 2; ++x) sol.q[d][x] = expected_return(mdp, d, x, shaped, v);
    for (int d = 0; d < states; ++d) {
      const double nv = std::max(sol.q[d][0], sol.q[d][1]);
      change = std::max(change, std::fabs(nv - v[d]));
      v[d] = nv;
    }
    if (change < tol) break;
  }
  sol.greedy.resize(states);
  for (int d = 0; d < states; ++d) sol.greedy[d] = sol.q[d][1] > sol.q[d][0] ? 1 : 0;
  return sol;
}

std::vector<std::array<double, 2>> policy_q(const TabularMdp& mdp, const std::vector<int>& policy,
                                            bool shaped, double tol) {
  const int states = mdp.d_max + 1;
  std::vector<double> v(states, 0.0);
  std::vector<std::array<double, 2>> q(states, {0.0, 0.0});
  for (int iter = 0; iter < 100000; ++iter) {
    double change = 0.0;
    for (int d = 0; d < states; ++d)
      for (int x = 0; x < 2; ++x) q[d][x] = expected_return(mdp, d, x, shaped, v);
    for (int d = 0; d < states; ++d) {
      const double nv = q[d][policy[d]];
      change = std::max(change, std::fabs(nv - v[d]));
      v[d] = nv;
    }
    if (change < tol) break;
  }
  return q;
}

ShapingReport shaping_suite(const TabularMdp& mdp) {
  const TabularSolution plain = value_iteration(mdp, false);
  const TabularSolution shaped = value_iteration(mdp, true);
  ShapingReport rep;
  rep.same_policy = plain.greedy == shaped.greedy;
  for (int d = 0; d <= mdp.d_max; ++d) {
    const double psi = potential(d, mdp.potential);
    for (int x = 0; x < 2; ++x)
      rep.max_q_offset_error =
          std::max(rep.max_q_offset_error, std::fabs(shaped.q[d][x] - (plain.q[d][x] - psi)));
  }
  return rep;
}

namespace {

double layer_rel_error(const std::vector<double>& fd, const std::vector<double>& an) {
  double diff = 0.0, nf = 0.0, na = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    diff += (fd[i] - an[i]) * (fd[i] - an[i]);
    nf += fd[i] * fd[i];
    na += an[i] * an[i];
  }
  const double scale = std::sqrt(std::max(nf, na));
  return scale > 0.0 ? std::sqrt(diff) / scale : 0.0;
}

}  // namespace

GradientReport gradient_suite(int users, int heads, int batch, std::uint64_t seed, double h) {
  SystemConfig cfg;
  cfg.users = users;
  cfg.flags.multi_head = heads == users;
  if (heads != users && heads != 1) throw std::invalid_argument("gradient_suite: heads must be K or 1");
  const SeedTree tree(seed);
  Rng rng = tree.stream("nets");
  Networks nets = Networks::init(cfg, rng);
  nets.actor_copy = MlpParams::random(cfg.actor_dims(), OutputMap::kHalfTanh, rng);
  nets.critic_copy = MlpParams::random(cfg.critic_dims(), OutputMap::kLinear, rng);

  Rng data = tree.stream("batch");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Transition> items(batch);
  for (Transition& t : items) {
    for (int i = 0; i < 2 * users; ++i) {
      t.state.push_back(u01(data));
      t.next_state.push_back(u01(data));
    }
    for (int k = 0; k < users; ++k) {
      t.action.push_back(u01(data));
      t.reward.push_back(12.0 * u01(data) - 1.0);
      t.scheduled.push_back(u01(data) < 0.5 ? 1 : 0);
      t.hol.push_back(static_cast<int>(8 * u01(data)));
    }
  }
  TrainingBatch b;
  for (Transition& t : items) {
    b.items.push_back(&t);
    b.u.push_back(0.25 + 1.5 * u01(data));
  }
  const LossReport analytic = kddpg_losses(b, nets, cfg.gamma);

  GradientReport rep;
  auto check = [&](MlpParams& params, const MlpParams& grads, bool critic) {
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      for (int part = 0; part < 2; ++part) {
        std::vector<double>& p = part == 0 ? params.layers[li].weights : params.layers[li].biases;
        const std::vector<double>& g = part == 0 ? grads.layers[li].weights : grads.layers[li].biases;
        std::vector<double> fd(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double orig = p[i];
          p[i] = orig + h;
          const LossReport plus = kddpg_losses(b, nets, cfg.gamma, ExecPolicy::kSerial, false);
          p[i] = orig - h;
          const LossReport minus = kddpg_losses(b, nets, cfg.gamma, ExecPolicy::kSerial, false);
          p[i] = orig;
          const double lp = critic ? plus.critic_loss : plus.actor_loss;
          const double lm = critic ? minus.critic_loss : minus.actor_loss;
          fd[i] = (lp - lm) / (2.0 * h);
        }
        LayerError e;
        e.name = std::string(critic ? "critic" : "actor") + ".L" + std::to_string(li) +
                 (part == 0 ? ".weights" : ".biases");
        e.rel_error = layer_rel_error(fd, g);
        rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
        rep.layers.push_back(e);
      }
    }
  };
  check(nets.critic_copy, analytic.critic_grad, true);
  check(nets.actor_copy, analytic.actor_grad, false);
  return rep;
}

ReplayReport replay_suite(std::size_t size, std::size_t draws, std::uint64_t seed) {
  const SeedTree tree(seed);
  Rng rng = tree.stream("weights");
  std::uniform_real_distribution<double> weight(0.05, 2.0);
  std::uniform_real_distribution<double> value(1.0, 3.0);
  ReplayMemory mem(size);
  std::vector<double> f(size);
  for (std::size_t i = 0; i < size; ++i) {
    mem.push(Transition{});
    mem.set_weight(i, weight(rng));
    f[i] = value(rng);
  }
  Rng sampler = tree.stream("sampling");
  const SampledBatch s = mem.sample(draws, SamplingMode::kPrioritized, sampler);

  ReplayReport rep;
  std::vector<std::int64_t> hits(size, 0);
  double weighted = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    ++hits[s.indices[d]];
    weighted += bias_weight(s.probabilities[d], size) * f[s.indices[d]];
  }
  weighted /= static_cast<double>(draws);
  double uniform = 0.0;
  for (double v : f) uniform += v;
  uniform /= static_cast<double>(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double expected = mem.weight(i) / mem.total_weight();
    rep.max_freq_error = std::max(
        rep.max_freq_error, std::fabs(static_cast<double>(hits[i]) / static_cast<double>(draws) - expected));
  }
  rep.unbiased_rel_error = std::fabs(weighted - uniform) / std::fabs(uniform);
  return rep;
}

}  // namespace schedlab::oracle
