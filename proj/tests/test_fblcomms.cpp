#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "oracles.hpp"
#include "schedlab/fblcomms.hpp"

using namespace schedlab;

namespace {

LinkParams table_link(double snr) {
  LinkParams l;
  l.snr_linear = snr;
  return l;
}

}  // namespace

TEST_CASE("q_function basic values") {
  CHECK(q_function(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(q_function(1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-13));
  CHECK(q_function(-3.0) == doctest::Approx(0.9986501019683699).epsilon(1e-13));
  for (double x : {0.1, 0.7, 1.5, 2.5, 4.0, 6.0, 8.0})
    CHECK(std::fabs(q_function(x) + q_function(-x) - 1.0) <= 1e-12);
}

TEST_CASE("q_function matches high precision for |x| <= 8") {
  double worst = 0.0;
  for (double x = -8.0; x <= 8.0; x += 0.01) {
    const double ref = static_cast<double>(oracle::q_function_hp(x));
    worst = std::max(worst, std::fabs(q_function(x) - ref) / ref);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("q_function is strictly decreasing and floored") {
  double prev = q_function(-8.0);
  for (double x = -7.9; x <= 37.0; x += 0.1) {
    const double q = q_function(x);
    CHECK(q < prev);
    prev = q;
  }
  CHECK(q_function(40.0) == kProbabilityFloor);
  CHECK(q_function(1e6) == kProbabilityFloor);
  CHECK_THROWS_AS(q_function(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(q_function(INFINITY), std::domain_error);
}

TEST_CASE("channel dispersion") {
  CHECK(channel_dispersion(1.0) == doctest::Approx(0.75));
  CHECK(channel_dispersion(1e9) == doctest::Approx(1.0));
  CHECK_THROWS_AS(channel_dispersion(0.0), std::domain_error);
  CHECK_THROWS_AS(channel_dispersion(-1.0), std::domain_error);
}

TEST_CASE("decoding error is one half when the capacity term equals L ln 2") {
  LinkParams l;
  // n = 1 RB of 22.5 symbols carrying exactly 256 bits
  l.snr_linear = std::expm1(256.0 * std::numbers::ln2 / l.symbols_per_rb());
  CHECK(decoding_error(l, 1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("decoding error at the reference operating point") {
  const LinkParams l = table_link(std::exp(3.8));
  CHECK(decoding_error(l, 2) > 0.5);
  CHECK(decoding_error(l, 3) <= 1e-5);
  CHECK(static_cast<double>(oracle::decoding_error_hp(l, 2)) > 0.5);
  CHECK(static_cast<double>(oracle::decoding_error_hp(l, 3)) <= 1e-5);
  CHECK(min_rbs(l) == MinRbs{3, true});
}

TEST_CASE("decoding error agrees with the high-precision evaluation") {
  for (double snr_db : {-5.0, 0.0, 5.0, 10.0, 16.5, 25.0}) {
    const LinkParams l = table_link(std::pow(10.0, snr_db / 10.0));
    for (int n = 1; n <= 60; ++n) {
      const long double ref = oracle::decoding_error_hp(l, n);
      if (ref < 1e-250L || ref > 0.999L) continue;
      const double rel = static_cast<double>(std::fabs((decoding_error(l, n) - ref) / ref));
      CHECK(rel < 1e-9);
    }
  }
}

TEST_CASE("decoding error stays inside (0,1) at extreme arguments") {
  for (double snr : {1e-12, 1e-6, 1e-3, 1.0, 1e3, 1e8}) {
    for (int n : {1, 2, 10, 1000, 100000}) {
      const double e = decoding_error(table_link(snr), n);
      CHECK(std::isfinite(e));
      CHECK(e > 0.0);
      CHECK(e < 1.0);
    }
  }
  CHECK_THROWS_AS(decoding_error(table_link(1.0), 0), std::invalid_argument);
}

TEST_CASE("min_rbs edge cases") {
  LinkParams l = table_link(1e-3);
  l.n_total = 50;
  CHECK(min_rbs(l) == MinRbs{50, false});

  l = table_link(1e6);
  CHECK(min_rbs(l) == MinRbs{1, true});

  l = table_link(std::exp(3.8));
  l.n_total = 2;
  CHECK(min_rbs(l) == MinRbs{2, false});
  l.n_total = 3;
  CHECK(min_rbs(l) == MinRbs{3, true});

  l.eps_max = 0.7;
  CHECK_THROWS_AS(min_rbs(l), std::invalid_argument);
  l = table_link(std::exp(3.8));
  l.n_total = 0;
  CHECK_THROWS_AS(min_rbs(l), std::invalid_argument);
  l = table_link(std::exp(3.8));
  l.rb_bandwidth_hz = 1000.0;  // 0.125 symbols per RB
  CHECK_THROWS_AS(min_rbs(l), std::invalid_argument);
}

TEST_CASE("min_rbs agrees with the exhaustive scan and the error is monotone") {
  const oracle::BlocklengthReport r = oracle::blocklength_suite(1000, 11);
  CHECK(r.draws == 1000);
  CHECK(r.scan_mismatches == 0);
  CHECK(r.monotone_n_violations == 0);
  CHECK(r.monotone_snr_violations == 0);
  CHECK(r.max_rel_error_vs_hp < 1e-6);
}
