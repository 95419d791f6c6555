#include "schedlab/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

#include "schedlab/env.hpp"

namespace schedlab {

double EpisodeMetrics::mean_loss() const {
  if (loss_prob.empty()) return 0.0;
  return std::accumulate(loss_prob.begin(), loss_prob.end(), 0.0) / loss_prob.size();
}

double EpisodeMetrics::mean_reward() const {
  if (avg_reward.empty()) return 0.0;
  return std::accumulate(avg_reward.begin(), avg_reward.end(), 0.0) / avg_reward.size();
}

MetricsWindow::MetricsWindow(int users)
    : losses_(users, 0), arrivals_(users, 0), reward_sum_(users, 0.0) {}

void MetricsWindow::add(const StepResult& step) {
  add(step.losses, step.arrivals, step.reward.per_user);
}

void MetricsWindow::add(std::span<const int> losses, std::span<const int> arrivals,
                        std::span<const double> rewards) {
  for (std::size_t k = 0; k < losses_.size(); ++k) {
    losses_[k] += losses[k];
    arrivals_[k] += arrivals[k];
    reward_sum_[k] += rewards[k];
  }
  ++slots_;
}

EpisodeMetrics MetricsWindow::finish(int window_index) const {
  EpisodeMetrics m;
  m.window = window_index;
  m.losses = losses_;
  m.arrivals = arrivals_;
  m.slots = slots_;
  m.deadline_misses = misses_;
  const std::size_t k_users = losses_.size();
  m.loss_prob.resize(k_users);
  m.avg_reward.resize(k_users);
  m.worst_reward = k_users ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t k = 0; k < k_users; ++k) {
    m.loss_prob[k] =
        arrivals_[k] > 0 ? std::min(1.0, static_cast<double>(losses_[k]) / arrivals_[k]) : 0.0;
    m.avg_reward[k] = slots_ > 0 ? reward_sum_[k] / static_cast<double>(slots_) : 0.0;
    m.worst_reward = std::min(m.worst_reward, m.avg_reward[k]);
  }
  return m;
}

void MetricsWindow::clear() {
  std::fill(losses_.begin(), losses_.end(), 0);
  std::fill(arrivals_.begin(), arrivals_.end(), 0);
  std::fill(reward_sum_.begin(), reward_sum_.end(), 0.0);
  slots_ = 0;
  misses_ = 0;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(std::ostream& os, std::span<const EpisodeMetrics> rows) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& m : rows) {
    for (std::size_t k = 0; k < m.loss_prob.size(); ++k) {
      os << m.window << ',' << k << ',' << format_double(m.loss_prob[k]) << ','
         << format_double(m.avg_reward[k]) << ',' << format_double(m.worst_reward) << '\n';
    }
  }
}

}  // namespace schedlab
