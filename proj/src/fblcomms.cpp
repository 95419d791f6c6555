#include "schedlab/fblcomms.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace schedlab {

void LinkParams::validate() const {
  if (packet_bits <= 0) throw std::invalid_argument("packet_bits must be positive");
  if (!(rb_bandwidth_hz > 0.0) || !std::isfinite(rb_bandwidth_hz))
    throw std::invalid_argument("rb_bandwidth_hz must be positive");
  if (!(tti_seconds > 0.0) || !std::isfinite(tti_seconds))
    throw std::invalid_argument("tti_seconds must be positive");
  if (!(snr_linear > 0.0) || !std::isfinite(snr_linear))
    throw std::invalid_argument("snr_linear must be positive");
  if (!(eps_max > 0.0 && eps_max < 0.5)) throw std::invalid_argument("eps_max must lie in (0,0.5)");
  if (n_total <= 0) throw std::invalid_argument("n_total must be positive");
  if (!(symbols_per_rb() > 1.0))
    throw std::invalid_argument("symbols per RB must exceed 1, got " +
                                std::to_string(symbols_per_rb()));
}

double q_function(double x) {
  if (!std::isfinite(x)) throw std::domain_error("q_function: non-finite argument");
  const double q = 0.5 * std::erfc(x / std::numbers::sqrt2);
  return q < kProbabilityFloor ? kProbabilityFloor : q;
}

double channel_dispersion(double snr_linear) {
  if (!(snr_linear > 0.0) || !std::isfinite(snr_linear))
    throw std::domain_error("channel_dispersion: snr must be positive and finite");
  const double a = 1.0 + snr_linear;
  return 1.0 - 1.0 / (a * a);
}

double decoding_error(const LinkParams& link, int n_rb) {
  if (n_rb < 1) throw std::invalid_argument("decoding_error: n_rb must be >= 1");
  const double blocklength = link.symbols_per_rb() * n_rb;
  const double v = channel_dispersion(link.snr_linear);
  const double numerator =
      -link.packet_bits * std::numbers::ln2 + blocklength * std::log1p(link.snr_linear);
  const double denominator = std::sqrt(blocklength * v);
  double eps;
  if (denominator > 0.0) {
    eps = q_function(numerator / denominator);
  } else {
    // V underflows only for snr ~ 1e-17; the capacity term is then negligible.
    eps = numerator >= 0.0 ? kProbabilityFloor : 1.0;
  }
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  return eps > kBelowOne ? kBelowOne : eps;
}

MinRbs min_rbs(const LinkParams& link) {
  link.validate();
  if (decoding_error(link, link.n_total) > link.eps_max) return {link.n_total, false};
  // invariant: predicate false below lo, true at hi
  int lo = 1;
  int hi = link.n_total;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (decoding_error(link, mid) <= link.eps_max)
      hi = mid;
    else
      lo = mid + 1;
  }
  return {hi, true};
}

}  // namespace schedlab
