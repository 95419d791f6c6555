#pragma once

// Length-prefixed messages between the BS agent and the edge server:
// type (1 byte) | payload length (u32 LE) | payload.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "schedlab/bytes.hpp"
#include "schedlab/metrics.hpp"
#include "schedlab/nn.hpp"
#include "schedlab/replay.hpp"

namespace schedlab {

enum class MsgType : std::uint8_t {
  kTransitionBatch = 0x01,
  kActorParams = 0x02,
  kAck = 0x03,
  kMetricsReport = 0x04,
};

inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::uint32_t kMaxPayloadBytes = 64u << 20;

struct WireMessage {
  MsgType type = MsgType::kAck;
  std::vector<std::uint8_t> payload;

  bool operator==(const WireMessage&) const = default;
};

std::vector<std::uint8_t> encode_frame(const WireMessage& m);

/// Reassembles frames from an arbitrary byte stream. Throws DecodeError on an
/// unknown type tag or a payload length above kMaxPayloadBytes.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<WireMessage> next();
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::deque<std::uint8_t> buf_;
};

/// count u32 | K u32 | per transition: slot u64, state 2K f64, action K f64,
/// scheduled K u8, hol K u32, reward K f64, next_state 2K f64.
WireMessage encode_transition_batch(std::span<const Transition> batch, int users);
std::vector<Transition> decode_transition_batch(const WireMessage& m);

/// Payload identical to the parameter file layout (see serialize()).
WireMessage encode_actor_params(const MlpParams& actor);
MlpParams decode_actor_params(const WireMessage& m);

/// Ack payload: the acknowledged parameter version (u64).
WireMessage encode_ack(std::uint64_t version);
std::uint64_t decode_ack(const WireMessage& m);

/// window u32 | K u32 | per user loss_prob f64, avg_reward f64 |
/// worst_reward f64 | deadline_misses u64.
WireMessage encode_metrics_report(const EpisodeMetrics& m);
EpisodeMetrics decode_metrics_report(const WireMessage& m);

}  // namespace schedlab
