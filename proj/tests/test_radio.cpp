#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "schedlab/radio.hpp"

using namespace schedlab;

TEST_CASE("path loss model") {
  CHECK(path_loss_db(1.0) == doctest::Approx(45.0));
  CHECK(path_loss_db(10.0) == doctest::Approx(75.0));
  CHECK(path_loss_db(100.0) == doctest::Approx(105.0));
  CHECK(path_loss_db(0.1) == doctest::Approx(45.0));
}

TEST_CASE("snr from link budget") {
  RadioParams rp;
  // 20 dBm/Hz - (-90 dBm/Hz) - 105 dB = 5 dB at the cell edge with unit gain
  CHECK(10.0 * std::log10(snr_linear(rp, 100.0, 1.0)) == doctest::Approx(5.0));
  CHECK(snr_linear(rp, 100.0, 0.5) == doctest::Approx(0.5 * snr_linear(rp, 100.0, 1.0)));
  rp.snr_offset_db = -3.0;
  CHECK(10.0 * std::log10(snr_linear(rp, 100.0, 1.0)) == doctest::Approx(2.0));
}

TEST_CASE("rician envelope has unit power and the closed-form mean") {
  Rng rng(3);
  for (double k : {0.0, 0.6, 5.0}) {
    double power = 0.0, mean = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double a = draw_rician_amplitude(k, rng);
      power += a * a;
      mean += a;
    }
    CHECK(power / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(mean / n == doctest::Approx(rician_amplitude_mean(k)).epsilon(0.005));
  }
  // Rayleigh special case
  CHECK(rician_amplitude_mean(0.0) == doctest::Approx(std::sqrt(M_PI) / 2.0));
}

TEST_CASE("mobility stays inside the cell and fades persist") {
  RadioParams rp;
  rp.speed_mps = 5000.0;  // exaggerated so reflections happen often
  Rng rng(8);
  UserChannel ch = spawn_channel(rp, rng);
  int kept = 0;
  const int steps = 50000;
  for (int t = 0; t < steps; ++t) {
    const UserChannel next = step_channel(ch, rp, rng);
    CHECK(next.position.norm() <= rp.cell_radius_m + 1e-9);
    CHECK(next.velocity.norm() == doctest::Approx(rp.speed_mps));
    if (next.small_scale_gain == ch.small_scale_gain) ++kept;
    ch = next;
  }
  CHECK(static_cast<double>(kept) / steps == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("spawned users are uniform over the disc") {
  RadioParams rp;
  Rng rng(2);
  int inner = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const UserChannel ch = spawn_channel(rp, rng);
    CHECK(ch.position.norm() <= rp.cell_radius_m);
    if (ch.position.norm() <= rp.cell_radius_m / 2.0) ++inner;
  }
  CHECK(static_cast<double>(inner) / n == doctest::Approx(0.25).epsilon(0.03));
}

TEST_CASE("queue timing") {
  Rng rng(1);
  UserQueue q(0.999999, 2, 3);
  CHECK(q.hol_delay(0) == 0);
  q.step(0, false, true, rng);  // arrival stamped 0
  CHECK(q.hol_delay(1) == 1);
  q.step(1, false, true, rng);
  CHECK(q.hol_delay(2) == 2);
  const QueueStep s = q.step(2, true, true, rng);  // d = 2 in window
  CHECK(s.delivered == 1);
  CHECK(s.lost == 0);
  CHECK(q.hol_delay(3) == 2);  // packet from slot 1 is now at the head
}

TEST_CASE("queue losses") {
  Rng rng(1);
  UserQueue q(0.999999, 2, 3);
  q.step(0, false, true, rng);
  QueueStep s = q.step(1, true, true, rng);  // d = 1 < d_min
  CHECK(s.lost == 1);
  CHECK(s.delivered == 0);
  s = q.step(2, true, false, rng);  // d = 1, early again
  CHECK(s.lost == 1);
  q.step(3, false, true, rng);
  q.step(4, false, true, rng);
  s = q.step(5, false, true, rng);  // head stamped 2 reaches d_max = 3 unscheduled
  CHECK(s.lost == 1);
  s = q.step(6, true, false, rng);  // in window but the decode failed
  CHECK(s.lost == 1);

  UserQueue empty(0.1, 5, 7);
  CHECK_THROWS_AS(empty.step(0, true, true, rng), std::logic_error);
  CHECK_THROWS_AS(UserQueue(0.0, 5, 7), std::invalid_argument);
  CHECK_THROWS_AS(UserQueue(0.1, 8, 7), std::invalid_argument);
}

TEST_CASE("hol transition rows sum to one") {
  for (double p : {0.05, 0.1, 0.5, 0.9}) {
    for (int i = 0; i <= 7; ++i) {
      for (int x = 0; x < 2; ++x) {
        if (x == 1 && i == 0) continue;
        double row = 0.0;
        for (int j = 0; j <= 7; ++j) {
          const double pr = hol_transition_prob(i, j, x == 1, p, 7);
          CHECK(pr >= 0.0);
          row += pr;
        }
        CHECK(std::fabs(row - 1.0) <= 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(hol_transition_prob(0, 0, true, 0.1, 7), std::domain_error);
  CHECK_THROWS_AS(hol_transition_prob(8, 0, false, 0.1, 7), std::domain_error);
  CHECK_THROWS_AS(hol_transition_prob(0, -1, false, 0.1, 7), std::domain_error);
}

TEST_CASE("hol transition closed forms") {
  const double p = 0.1;
  CHECK(hol_transition_prob(0, 1, false, p, 7) == doctest::Approx(p));
  CHECK(hol_transition_prob(3, 4, false, p, 7) == 1.0);
  CHECK(hol_transition_prob(3, 0, true, p, 7) == doctest::Approx(std::pow(0.9, 3)));
  CHECK(hol_transition_prob(3, 2, true, p, 7) == doctest::Approx(p * 0.9));
  CHECK(hol_transition_prob(3, 4, true, p, 7) == 0.0);
  CHECK(hol_transition_prob(7, 7, false, p, 7) == doctest::Approx(p));
}

TEST_CASE("simulated hol transitions match the closed forms") {
  const oracle::MarkovReport r = oracle::markov_suite(0.1, 5, 7, 20000, 5, ExecPolicy::kSerial);
  CHECK(r.min_row_visits >= 20000);
  CHECK(r.max_abs_error < 0.02);
  CHECK(r.max_row_sum_error <= 1e-12);
}

TEST_CASE("markov counts do not depend on the execution policy") {
  const auto serial = oracle::markov_counts(0.1, 5, 7, 6, 20000, 9, ExecPolicy::kSerial);
  const auto parallel = oracle::markov_counts(0.1, 5, 7, 6, 20000, 9, ExecPolicy::kParallel);
  CHECK(serial == parallel);
  CHECK(serial.slots == 6 * 20000);
}
