#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace schedlab {

struct StepResult;

/// Per-window QoS summary, one window = metrics_window_episodes episodes.
struct EpisodeMetrics {
  int window = 0;
  std::vector<double> loss_prob;   // losses / arrivals per user
  std::vector<double> avg_reward;  // unshaped reward per slot per user
  double worst_reward = 0.0;       // min over users of avg_reward
  std::vector<std::int64_t> losses;
  std::vector<std::int64_t> arrivals;
  std::int64_t slots = 0;
  std::uint64_t deadline_misses = 0;

  double mean_loss() const;
  double mean_reward() const;
};

class MetricsWindow {
 public:
  explicit MetricsWindow(int users = 0);
  void add(const StepResult& step);
  void add(std::span<const int> losses, std::span<const int> arrivals,
           std::span<const double> rewards);
  void add_deadline_miss() { ++misses_; }
  std::int64_t slots() const { return slots_; }
  EpisodeMetrics finish(int window_index) const;
  void clear();

 private:
  std::vector<std::int64_t> losses_;
  std::vector<std::int64_t> arrivals_;
  std::vector<double> reward_sum_;
  std::int64_t slots_ = 0;
  std::uint64_t misses_ = 0;
};

inline constexpr const char* kMetricsCsvHeader = "window,user,loss_prob,avg_reward,worst_reward";

/// Header plus one row per (window, user); values printed with %.17g.
void write_metrics_csv(std::ostream& os, std::span<const EpisodeMetrics> rows);
std::string format_double(double v);

}  // namespace schedlab
