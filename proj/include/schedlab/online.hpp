#pragma once

// Online fine-tuning: a BS agent doing per-TTI inference under a deadline
// budget, and an edge server that keeps training on uploaded transitions and
// pushes actor parameters back. The two talk only through MessageChannel.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "schedlab/config.hpp"
#include "schedlab/drl.hpp"
#include "schedlab/metrics.hpp"
#include "schedlab/wire.hpp"

namespace schedlab {

/// theta <- theta * (1 + Normal(0, v^2) * exp(-lambda * (slot - start_slot) * tti)).
struct ParamNoiseSchedule {
  double v = 0.1;
  double lambda = 5e4;
  std::int64_t start_slot = 0;
  double tti_seconds = 125e-6;

  static ParamNoiseSchedule from(const SystemConfig& cfg);
  double scale(std::int64_t slot) const;
  /// First slot offset at which the noise magnitude is below `fraction` of its initial value.
  std::int64_t slots_until(double fraction) const;
};

MlpParams apply_param_noise(const MlpParams& params, const ParamNoiseSchedule& schedule,
                            std::int64_t slot, Rng& rng);

/// Converts a measured HoL delay in seconds to slots, d = round(d_hat / tti).
int quantize_hol(double seconds, double tti_seconds);

using Clock = std::chrono::steady_clock;
inline constexpr Clock::duration kNoDeadline = Clock::duration::max();

struct AgentDecision {
  SchedulerAction action;
  std::vector<double> actor_output;  // continuous output behind `action`
  bool deadline_miss = false;
  bool idle = false;  // no actor installed yet
};

class BsAgent {
 public:
  BsAgent(const SystemConfig& cfg, Clock::duration budget = kNoDeadline);

  /// Installs a parameter snapshot. Stale or equal versions are ignored;
  /// returns whether the snapshot was taken.
  bool install(MlpParams actor);

  /// Per-TTI decision from local state only. If inference does not finish
  /// within the budget the cached action is executed and the fresh one is
  /// cached for the next slot.
  AgentDecision step(const NetworkState& state);

  bool has_actor() const { return actor_.has_value(); }
  const std::optional<MlpParams>& actor() const { return actor_; }
  std::uint64_t version() const { return actor_ ? actor_->version : 0; }
  std::uint64_t deadline_misses() const { return misses_; }
  std::uint64_t idle_slots() const { return idle_; }
  const std::vector<double>& inference_ns() const { return inference_ns_; }

 private:
  Mode mode_;
  int users_;
  int n_total_;
  Clock::duration budget_;
  std::optional<MlpParams> actor_;
  SchedulerAction cached_;
  std::vector<double> cached_output_;
  std::uint64_t misses_ = 0;
  std::uint64_t idle_ = 0;
  std::vector<double> inference_ns_;
};

class ChannelClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bidirectional message pipe. Implementations carry encoded frames.
class MessageChannel {
 public:
  virtual ~MessageChannel() = default;
  virtual void send(const WireMessage& m) = 0;
  /// Waits up to `timeout` for a message; nullopt on timeout. Throws
  /// ChannelClosed once the peer is gone and nothing is buffered, and
  /// DecodeError on a malformed frame.
  virtual std::optional<WireMessage> receive(Clock::duration timeout) = 0;
  virtual void close() = 0;
};

/// Two connected in-process endpoints exchanging raw frame bytes.
std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_inprocess_pair();

/// Raw byte injection for tests of malformed input on an in-process endpoint.
void inject_raw_bytes(MessageChannel& sender, std::span<const std::uint8_t> bytes);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  static Endpoint parse(const std::string& addr_port);
  std::string str() const;
};

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout` for a connection.
  std::unique_ptr<MessageChannel> accept(Clock::duration timeout);
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<MessageChannel> tcp_connect(const Endpoint& ep, Clock::duration timeout);

struct ServerStats {
  std::uint64_t batches = 0;
  std::uint64_t transitions = 0;
  std::uint64_t iterations = 0;
  std::uint64_t pushes = 0;
  std::uint64_t connection_errors = 0;
};

class EdgeServer {
 public:
  /// `init` holds the networks to fine-tune (off-line trained or random).
  EdgeServer(const SystemConfig& cfg, Networks init);

  /// Consumes one message. A transition batch is stored; once the memory
  /// holds a full training batch, one training iteration runs and a noised,
  /// version-incremented ActorParams message is returned, otherwise an Ack.
  /// Throws DecodeError on malformed payloads.
  WireMessage handle(const WireMessage& m);

  /// Serves one connection until it closes. Malformed input ends the
  /// connection (counted in stats) without throwing.
  void serve(MessageChannel& ch, const std::atomic<bool>& stop);

  const ServerStats& stats() const { return stats_; }
  const Networks& networks() const { return trainer_.networks(); }
  std::uint64_t version() const { return version_; }
  std::int64_t received_slots() const { return received_slots_; }

 private:
  SystemConfig cfg_;
  Trainer trainer_;
  ParamNoiseSchedule noise_;
  Rng noise_rng_;
  std::uint64_t version_ = 0;
  std::int64_t received_slots_ = 0;
  ServerStats stats_;
};

enum class Transport { kInProcess, kTcp };

struct OnlineOptions {
  int episodes = 10;
  Clock::duration deadline = kNoDeadline;
  /// Lockstep waits for the server reply after each upload, which makes runs
  /// reproducible. Otherwise replies are picked up whenever they arrive.
  bool lockstep = true;
  Transport transport = Transport::kInProcess;
  Endpoint endpoint{};
  /// Disables fine-tuning: transitions are not uploaded and the initial
  /// actor runs unchanged.
  bool frozen = false;
};

struct OnlineReport {
  std::vector<EpisodeMetrics> windows;
  ServerStats server;
  std::uint64_t final_version = 0;
  std::uint64_t deadline_misses = 0;
  std::uint64_t versions_received = 0;
  bool versions_monotone = true;
  /// Mean HoL delay at delivery plus the constant D_other offset, seconds.
  double mean_reported_latency_s = 0.0;
  MlpParams final_actor;
};

/// Runs the BS in `env_cfg` (e.g. with a perturbed SNR) and a server
/// fine-tuning `init`, connected by the chosen transport.
OnlineReport run_online(const SystemConfig& env_cfg, const Networks& init, const OnlineOptions& opt);

/// BS side only, talking to a remote server over `ch`.
OnlineReport run_bs(const SystemConfig& env_cfg, const MlpParams& initial_actor,
                    MessageChannel& ch, const OnlineOptions& opt);

}  // namespace schedlab
