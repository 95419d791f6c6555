#include <doctest.h>

#include <numeric>

#include "schedlab/baselines.hpp"

using namespace schedlab;

namespace {

using V = std::vector<int>;

SystemConfig small_config() {
  SystemConfig c;
  c.users = 3;
  c.rbs = 6;
  c.episode_slots = 200;
  return c;
}

}  // namespace

TEST_CASE("empty queues give an all-zero action") {
  for (auto kind : {BaselineKind::kRoundRobin, BaselineKind::kEarliestDeadlineFirst,
                    BaselineKind::kMaxThroughput}) {
    BaselinePolicy p(kind);
    CHECK(p.decide(V{0, 0, 0}, V{1, 1, 1}, 10) == V{0, 0, 0});
  }
}

TEST_CASE("EDF serves the oldest head of line first") {
  BaselinePolicy p(BaselineKind::kEarliestDeadlineFirst);
  CHECK(p.decide(V{7, 3}, V{4, 4}, 8) == V{1, 1});
  CHECK(p.decide(V{7, 3}, V{4, 4}, 5) == V{1, 0});
  CHECK(p.decide(V{3, 7}, V{4, 4}, 5) == V{0, 1});
}

TEST_CASE("MT admits the best channels under the budget") {
  BaselinePolicy p(BaselineKind::kMaxThroughput);
  CHECK(p.decide(V{1, 1}, V{2, 9}, 10) == V{1, 0});
  CHECK(p.decide(V{1, 1, 1}, V{5, 2, 3}, 5) == V{0, 1, 1});
}

TEST_CASE("users that do not fit are skipped, later ones still admitted") {
  BaselinePolicy p(BaselineKind::kEarliestDeadlineFirst);
  CHECK(p.decide(V{7, 6, 5}, V{3, 6, 2}, 6) == V{1, 0, 1});
}

TEST_CASE("RR cycles through the users") {
  BaselinePolicy p(BaselineKind::kRoundRobin);
  CHECK(p.decide(V{1, 1, 1}, V{4, 4, 4}, 4) == V{1, 0, 0});
  CHECK(p.cursor() == 1);
  CHECK(p.decide(V{1, 1, 1}, V{4, 4, 4}, 4) == V{0, 1, 0});
  CHECK(p.decide(V{1, 1, 1}, V{4, 4, 4}, 4) == V{0, 0, 1});
  CHECK(p.decide(V{1, 1, 1}, V{4, 4, 4}, 4) == V{1, 0, 0});
  // empty queues are passed over
  CHECK(p.decide(V{0, 0, 2}, V{4, 4, 4}, 4) == V{0, 0, 1});
}

TEST_CASE("window-aware variants hold back users below D_min") {
  BaselinePolicy p(BaselineKind::kEarliestDeadlineFirst, true, 5);
  CHECK(p.decide(V{4, 5, 7}, V{1, 1, 1}, 10) == V{0, 1, 1});
  BaselinePolicy classic(BaselineKind::kEarliestDeadlineFirst);
  CHECK(classic.decide(V{4, 5, 7}, V{1, 1, 1}, 10) == V{1, 1, 1});
}

TEST_CASE("baselines respect the budget and skip empty queues; EDF never strands D_max") {
  Rng rng(1);
  std::uniform_int_distribution<int> hol(0, 7), need(1, 8), budget(0, 20);
  for (auto kind : {BaselineKind::kRoundRobin, BaselineKind::kEarliestDeadlineFirst,
                    BaselineKind::kMaxThroughput}) {
    BaselinePolicy p(kind);
    for (int t = 0; t < 20000; ++t) {
      V d(4), n(4);
      for (int k = 0; k < 4; ++k) {
        d[k] = hol(rng);
        n[k] = need(rng);
      }
      const int total = budget(rng);
      const V x = p.decide(d, n, total);
      int used = 0;
      for (int k = 0; k < 4; ++k) {
        if (d[k] == 0) CHECK(x[k] == 0);
        used += x[k] * n[k];
      }
      CHECK(used <= total);
      if (kind == BaselineKind::kEarliestDeadlineFirst) {
        for (int k = 0; k < 4; ++k)
          if (d[k] == 7 && x[k] == 0) CHECK(n[k] > total - used);
      }
    }
  }
}

TEST_CASE("parse and name") {
  CHECK(parse_baseline("EDF") == BaselineKind::kEarliestDeadlineFirst);
  CHECK(parse_baseline("rr") == BaselineKind::kRoundRobin);
  CHECK(parse_baseline("mt") == BaselineKind::kMaxThroughput);
  CHECK_FALSE(parse_baseline("pf").has_value());
  CHECK(std::string(to_string(BaselineKind::kMaxThroughput)) == "mt");
}

TEST_CASE("ample resources on a fade-free channel make EDF nearly lossless") {
  SystemConfig c = small_config();
  c.rbs = 100;
  c.channel_model = ChannelModel::kFixed;
  // Classic EDF sends a packet at its first chance, so it needs a window that
  // opens at d = 1.
  c.d_min = 1;
  const EvalResult classic = evaluate(c, baseline_factory(BaselineKind::kEarliestDeadlineFirst, c), 20, 3);
  CHECK(classic.mean_loss < 0.01);
  c.d_min = 5;
  const EvalResult aware =
      evaluate(c, baseline_factory(BaselineKind::kEarliestDeadlineFirst, c, true), 20, 3);
  CHECK(aware.mean_loss < 0.01);
}

TEST_CASE("no resources lose every packet that reaches D_max") {
  SystemConfig c = small_config();
  c.rbs = 0;
  const EvalResult r = evaluate(c, baseline_factory(BaselineKind::kRoundRobin, c), 20, 3);
  std::int64_t arrivals = 0, losses = 0;
  for (int k = 0; k < c.users; ++k) {
    arrivals += r.arrivals[k];
    losses += r.losses[k];
  }
  CHECK(arrivals > 0);
  // only packets still inside the delay budget at episode end escape
  CHECK(arrivals - losses <= 20 * c.users * c.d_max);
  CHECK(r.mean_reward == 0.0);
}

TEST_CASE("evaluation is reproducible and independent of the execution policy") {
  const SystemConfig c = small_config();
  const auto f = baseline_factory(BaselineKind::kMaxThroughput, c, true);
  const EvalResult a = evaluate(c, f, 12, 5, ExecPolicy::kSerial);
  const EvalResult b = evaluate(c, f, 12, 5, ExecPolicy::kParallel);
  CHECK(a.losses == b.losses);
  CHECK(a.arrivals == b.arrivals);
  CHECK(a.avg_reward == b.avg_reward);
  CHECK(a.mean_loss == b.mean_loss);
  CHECK(a.slots == 12 * c.episode_slots);
  CHECK(a.worst_loss >= a.mean_loss);
  CHECK(a.loss_prob[a.worst_user] == a.worst_loss);
}

TEST_CASE("window-aware schedulers beat the classic ones at K=3, N=6") {
  const SystemConfig c = small_config();
  for (auto kind : {BaselineKind::kRoundRobin, BaselineKind::kEarliestDeadlineFirst,
                    BaselineKind::kMaxThroughput}) {
    const double classic = evaluate(c, baseline_factory(kind, c), 20, 4).mean_loss;
    const double aware = evaluate(c, baseline_factory(kind, c, true), 20, 4).mean_loss;
    CHECK(aware < classic);
  }
}
