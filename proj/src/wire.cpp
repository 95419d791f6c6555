#include "schedlab/wire.hpp"

#include <string>

namespace schedlab {

namespace {

constexpr std::uint32_t kMaxUsers = 1u << 16;

void expect_type(const WireMessage& m, MsgType t, const char* what) {
  if (m.type != t) throw DecodeError(std::string(what) + ": unexpected message type");
}

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x04; }

std::vector<double> read_f64s(ByteReader& r, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = r.f64();
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const WireMessage& m) {
  if (m.payload.size() > kMaxPayloadBytes) throw std::length_error("encode_frame: payload too large");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(m.type));
  w.u32(static_cast<std::uint32_t>(m.payload.size()));
  w.bytes(m.payload);
  return w.take();
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<WireMessage> FrameDecoder::next() {
  if (buf_.empty()) return std::nullopt;
  if (!known_type(buf_[0]))
    throw DecodeError("frame: unknown message type " + std::to_string(buf_[0]));
  if (buf_.size() < kFrameHeaderBytes) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(buf_[1 + i]) << (8 * i);
  if (len > kMaxPayloadBytes) throw DecodeError("frame: payload length " + std::to_string(len));
  if (buf_.size() < kFrameHeaderBytes + len) return std::nullopt;
  WireMessage m;
  m.type = static_cast<MsgType>(buf_[0]);
  const auto begin = buf_.begin() + kFrameHeaderBytes;
  m.payload.assign(begin, begin + len);
  buf_.erase(buf_.begin(), begin + len);
  return m;
}

WireMessage encode_transition_batch(std::span<const Transition> batch, int users) {
  const std::size_t k = static_cast<std::size_t>(users);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(batch.size()));
  w.u32(static_cast<std::uint32_t>(users));
  for (const Transition& t : batch) {
    if (t.state.size() != 2 * k || t.next_state.size() != 2 * k || t.action.size() != k ||
        t.scheduled.size() != k || t.hol.size() != k || t.reward.size() != k)
      throw std::invalid_argument("encode_transition_batch: transition does not match K");
    w.u64(static_cast<std::uint64_t>(t.slot_index));
    for (double v : t.state) w.f64(v);
    for (double v : t.action) w.f64(v);
    for (std::uint8_t v : t.scheduled) w.u8(v);
    for (int v : t.hol) w.u32(static_cast<std::uint32_t>(v));
    for (double v : t.reward) w.f64(v);
    for (double v : t.next_state) w.f64(v);
  }
  return {MsgType::kTransitionBatch, w.take()};
}

std::vector<Transition> decode_transition_batch(const WireMessage& m) {
  expect_type(m, MsgType::kTransitionBatch, "transition batch");
  ByteReader r(m.payload);
  const std::uint32_t count = r.u32();
  const std::uint32_t k = r.u32();
  if (k == 0 || k > kMaxUsers) throw DecodeError("transition batch: invalid user count");
  const std::size_t per = 8 + k * (2 * 8 + 8 + 1 + 4 + 8 + 2 * 8);
  if (r.remaining() != per * count)
    throw DecodeError("transition batch: payload size does not match count");
  std::vector<Transition> out(count);
  for (Transition& t : out) {
    t.slot_index = static_cast<std::int64_t>(r.u64());
    t.state = read_f64s(r, 2 * k);
    t.action = read_f64s(r, k);
    t.scheduled.resize(k);
    for (auto& v : t.scheduled) {
      v = r.u8();
      if (v > 1) throw DecodeError("transition batch: scheduled flag must be 0 or 1");
    }
    t.hol.resize(k);
    for (int& v : t.hol) {
      const std::uint32_t d = r.u32();
      if (d > (1u << 30)) throw DecodeError("transition batch: HoL delay out of range");
      v = static_cast<int>(d);
    }
    t.reward = read_f64s(r, k);
    t.next_state = read_f64s(r, 2 * k);
  }
  r.expect_done("transition batch");
  return out;
}

WireMessage encode_actor_params(const MlpParams& actor) {
  return {MsgType::kActorParams, serialize(actor)};
}

MlpParams decode_actor_params(const WireMessage& m) {
  expect_type(m, MsgType::kActorParams, "actor params");
  return deserialize(m.payload, OutputMap::kHalfTanh);
}

WireMessage encode_ack(std::uint64_t version) {
  ByteWriter w;
  w.u64(version);
  return {MsgType::kAck, w.take()};
}

std::uint64_t decode_ack(const WireMessage& m) {
  expect_type(m, MsgType::kAck, "ack");
  ByteReader r(m.payload);
  const std::uint64_t v = r.u64();
  r.expect_done("ack");
  return v;
}

WireMessage encode_metrics_report(const EpisodeMetrics& m) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(m.window));
  w.u32(static_cast<std::uint32_t>(m.loss_prob.size()));
  for (std::size_t k = 0; k < m.loss_prob.size(); ++k) {
    w.f64(m.loss_prob[k]);
    w.f64(k < m.avg_reward.size() ? m.avg_reward[k] : 0.0);
  }
  w.f64(m.worst_reward);
  w.u64(m.deadline_misses);
  return {MsgType::kMetricsReport, w.take()};
}

EpisodeMetrics decode_metrics_report(const WireMessage& m) {
  expect_type(m, MsgType::kMetricsReport, "metrics report");
  ByteReader r(m.payload);
  EpisodeMetrics out;
  out.window = static_cast<int>(r.u32());
  const std::uint32_t k = r.u32();
  if (k > kMaxUsers) throw DecodeError("metrics report: invalid user count");
  if (r.remaining() != static_cast<std::size_t>(k) * 16 + 16)
    throw DecodeError("metrics report: payload size does not match user count");
  out.loss_prob.resize(k);
  out.avg_reward.resize(k);
  for (std::uint32_t i = 0; i < k; ++i) {
    out.loss_prob[i] = r.f64();
    out.avg_reward[i] = r.f64();
  }
  out.worst_reward = r.f64();
  out.deadline_misses = r.u64();
  r.expect_done("metrics report");
  return out;
}

}  // namespace schedlab
