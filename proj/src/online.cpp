#include "schedlab/online.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <thread>
#include <utility>

namespace schedlab {

ParamNoiseSchedule ParamNoiseSchedule::from(const SystemConfig& cfg) {
  ParamNoiseSchedule s;
  s.v = cfg.param_noise_v;
  s.lambda = cfg.param_noise_lambda;
  s.tti_seconds = cfg.tti_seconds;
  return s;
}

double ParamNoiseSchedule::scale(std::int64_t slot) const {
  const double t = static_cast<double>(std::max<std::int64_t>(slot - start_slot, 0));
  return std::exp(-lambda * t * tti_seconds);
}

std::int64_t ParamNoiseSchedule::slots_until(double fraction) const {
  if (!(fraction > 0.0) || fraction >= 1.0) throw std::invalid_argument("slots_until: fraction in (0,1)");
  if (!(lambda * tti_seconds > 0.0)) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::floor(-std::log(fraction) / (lambda * tti_seconds))) + 1;
}

MlpParams apply_param_noise(const MlpParams& params, const ParamNoiseSchedule& schedule,
                            std::int64_t slot, Rng& rng) {
  MlpParams out = params;
  const double s = schedule.scale(slot);
  if (schedule.v == 0.0 || s == 0.0) return out;
  std::normal_distribution<double> normal(0.0, schedule.v);
  out.for_each([&](double& w) { w *= 1.0 + normal(rng) * s; });
  return out;
}

int quantize_hol(double seconds, double tti_seconds) {
  if (!(tti_seconds > 0.0) || !(seconds >= 0.0))
    throw std::invalid_argument("quantize_hol: need a positive TTI and a non-negative delay");
  return static_cast<int>(std::llround(seconds / tti_seconds));
}

BsAgent::BsAgent(const SystemConfig& cfg, Clock::duration budget)
    : mode_(cfg.mode), users_(cfg.users), n_total_(cfg.rbs), budget_(budget) {
  cached_.mode = mode_;
  cached_.values.assign(users_, 0);
  cached_output_.assign(users_, 0.0);
}

bool BsAgent::install(MlpParams actor) {
  if (actor.input_size() != 2 * users_ || actor.output_size() != users_)
    throw std::invalid_argument("BsAgent::install: actor shape does not match K");
  if (actor_ && actor.version <= actor_->version) return false;
  actor_ = std::move(actor);
  return true;
}

AgentDecision BsAgent::step(const NetworkState& state) {
  AgentDecision d;
  if (!actor_) {
    ++idle_;
    d.idle = true;
    d.action.mode = mode_;
    d.action.values.assign(users_, 0);
    d.actor_output.assign(users_, 0.0);
    return d;
  }
  const auto t0 = Clock::now();
  std::vector<double> out = forward(*actor_, state.flatten());
  SchedulerAction fresh = to_discrete_action(out, mode_, n_total_);
  const auto elapsed = Clock::now() - t0;
  inference_ns_.push_back(std::chrono::duration<double, std::nano>(elapsed).count());
  if (elapsed < budget_) {
    cached_ = fresh;
    cached_output_ = out;
    d.action = std::move(fresh);
    d.actor_output = std::move(out);
    return d;
  }
  ++misses_;
  d.deadline_miss = true;
  d.action = std::exchange(cached_, std::move(fresh));
  d.actor_output = std::exchange(cached_output_, std::move(out));
  return d;
}

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> bytes;
  bool closed = false;
};

class InProcessChannel : public MessageChannel {
 public:
  InProcessChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~InProcessChannel() override { close(); }

  void send(const WireMessage& m) override { write(encode_frame(m)); }

  void write(std::span<const std::uint8_t> raw) {
    std::lock_guard<std::mutex> lock(out_->mu);
    if (out_->closed) throw ChannelClosed("in-process channel: peer closed");
    out_->bytes.insert(out_->bytes.end(), raw.begin(), raw.end());
    out_->cv.notify_all();
  }

  std::optional<WireMessage> receive(Clock::duration timeout) override {
    const auto deadline = timeout == Clock::duration::max() ? Clock::time_point::max()
                                                            : Clock::now() + timeout;
    for (;;) {
      if (auto m = decoder_.next()) return m;
      std::unique_lock<std::mutex> lock(in_->mu);
      if (in_->bytes.empty()) {
        if (in_->closed) throw ChannelClosed("in-process channel: closed");
        if (deadline == Clock::time_point::max()) {
          in_->cv.wait(lock, [&] { return !in_->bytes.empty() || in_->closed; });
        } else if (!in_->cv.wait_until(lock, deadline,
                                       [&] { return !in_->bytes.empty() || in_->closed; })) {
          return std::nullopt;
        }
        if (in_->bytes.empty()) continue;
      }
      std::vector<std::uint8_t> chunk(in_->bytes.begin(), in_->bytes.end());
      in_->bytes.clear();
      lock.unlock();
      decoder_.feed(chunk);
    }
  }

  void close() override {
    for (auto& p : {in_, out_}) {
      std::lock_guard<std::mutex> lock(p->mu);
      p->closed = true;
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
  FrameDecoder decoder_;
};

class TcpChannel : public MessageChannel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpChannel() override { close(); }

  void send(const WireMessage& m) override {
    const std::vector<std::uint8_t> frame = encode_frame(m);
    std::size_t sent = 0;
    while (sent < frame.size()) {
      if (fd_ < 0) throw ChannelClosed("tcp channel: closed");
      const ssize_t n = ::send(fd_, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ChannelClosed(std::string("tcp send: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::optional<WireMessage> receive(Clock::duration timeout) override {
    const auto deadline = timeout == Clock::duration::max() ? Clock::time_point::max()
                                                            : Clock::now() + timeout;
    for (;;) {
      if (auto m = decoder_.next()) return m;
      if (fd_ < 0 || eof_) throw ChannelClosed("tcp channel: closed");
      int wait_ms = -1;
      if (deadline != Clock::time_point::max()) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0 && timeout.count() > 0) return std::nullopt;
        wait_ms = static_cast<int>(std::clamp<std::int64_t>(left.count(), 0, 1 << 30));
      }
      pollfd p{fd_, POLLIN, 0};
      const int r = ::poll(&p, 1, wait_ms);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ChannelClosed(std::string("tcp poll: ") + std::strerror(errno));
      }
      if (r == 0) return std::nullopt;
      std::uint8_t buf[65536];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ChannelClosed(std::string("tcp recv: ") + std::strerror(errno));
      }
      if (n == 0) {
        eof_ = true;
        continue;
      }
      decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  bool eof_ = false;
  FrameDecoder decoder_;
};

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
    throw std::invalid_argument("endpoint: not an IPv4 address: " + ep.host);
  return addr;
}

}  // namespace

std::pair<std::unique_ptr<MessageChannel>, std::unique_ptr<MessageChannel>> make_inprocess_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<InProcessChannel>(b_to_a, a_to_b),
          std::make_unique<InProcessChannel>(a_to_b, b_to_a)};
}

void inject_raw_bytes(MessageChannel& sender, std::span<const std::uint8_t> bytes) {
  auto* ch = dynamic_cast<InProcessChannel*>(&sender);
  if (!ch) throw std::invalid_argument("inject_raw_bytes: not an in-process channel");
  ch->write(bytes);
}

Endpoint Endpoint::parse(const std::string& addr_port) {
  const auto colon = addr_port.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("endpoint: expected ADDR:PORT");
  Endpoint ep;
  ep.host = addr_port.substr(0, colon);
  if (ep.host.empty() || ep.host == "localhost") ep.host = "127.0.0.1";
  const std::string port = addr_port.substr(colon + 1);
  std::size_t used = 0;
  int v = -1;
  try {
    v = std::stoi(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || v < 0 || v > 65535)
    throw std::invalid_argument("endpoint: invalid port '" + port + "'");
  ep.port = static_cast<std::uint16_t>(v);
  return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

TcpListener::TcpListener(const Endpoint& ep) {
  const sockaddr_in addr = to_sockaddr(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(fd_, 4) != 0) {
    const std::string err = std::strerror(errno);
    close();
    throw std::runtime_error("listen on " + ep.str() + ": " + err);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<MessageChannel> TcpListener::accept(Clock::duration timeout) {
  const int ms = timeout == Clock::duration::max()
                     ? -1
                     : static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
  pollfd p{fd_, POLLIN, 0};
  if (::poll(&p, 1, ms) <= 0) return nullptr;
  const int c = ::accept(fd_, nullptr, nullptr);
  if (c < 0) return nullptr;
  return std::make_unique<TcpChannel>(c);
}

std::unique_ptr<MessageChannel> tcp_connect(const Endpoint& ep, Clock::duration timeout) {
  const sockaddr_in addr = to_sockaddr(ep);
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0)
      return std::make_unique<TcpChannel>(fd);
    const std::string err = std::strerror(errno);
    ::close(fd);
    if (Clock::now() >= deadline) throw std::runtime_error("connect to " + ep.str() + ": " + err);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

EdgeServer::EdgeServer(const SystemConfig& cfg, Networks init)
    : cfg_(cfg),
      trainer_(cfg, std::move(init)),
      noise_(ParamNoiseSchedule::from(cfg)),
      noise_rng_(SeedTree(cfg.seed).stream("param-noise")),
      version_(trainer_.networks().actor.version) {}

WireMessage EdgeServer::handle(const WireMessage& m) {
  switch (m.type) {
    case MsgType::kTransitionBatch: break;
    case MsgType::kMetricsReport:
      decode_metrics_report(m);
      return encode_ack(version_);
    default:
      throw DecodeError("server: unexpected message type from BS");
  }
  std::vector<Transition> batch = decode_transition_batch(m);
  const int k_users = cfg_.users;
  const PotentialParams pp = potential_of(cfg_);
  for (Transition& t : batch) {
    if (static_cast<int>(t.hol.size()) != k_users)
      throw DecodeError("server: transition batch has the wrong number of users");
    if (cfg_.flags.reward_shaping) {
      for (int k = 0; k < k_users; ++k) {
        const int d_next = static_cast<int>(std::lround(t.next_state[k] * cfg_.d_max));
        t.reward[k] = shape_reward(t.reward[k], t.hol[k], d_next, cfg_.gamma, pp);
      }
    }
    received_slots_ = std::max(received_slots_, t.slot_index + 1);
    trainer_.push(std::move(t));
    ++stats_.transitions;
  }
  ++stats_.batches;
  if (trainer_.memory().size() < static_cast<std::size_t>(cfg_.batch_size)) return encode_ack(version_);

  trainer_.train_iteration();
  ++stats_.iterations;
  MlpParams pushed = apply_param_noise(trainer_.networks().actor, noise_, received_slots_ - 1, noise_rng_);
  pushed.version = ++version_;
  ++stats_.pushes;
  return encode_actor_params(pushed);
}

void EdgeServer::serve(MessageChannel& ch, const std::atomic<bool>& stop) {
  bool peer_gone = false;
  while (!stop.load()) {
    try {
      auto m = ch.receive(std::chrono::milliseconds(50));
      if (!m) continue;
      const WireMessage reply = handle(*m);
      // the peer may hang up with uploads still buffered; keep draining them
      if (!peer_gone) {
        try {
          ch.send(reply);
        } catch (const ChannelClosed&) {
          peer_gone = true;
        }
      }
    } catch (const ChannelClosed&) {
      return;
    } catch (const DecodeError&) {
      ++stats_.connection_errors;
      ch.close();
      return;
    }
  }
}

namespace {

void take_reply(const WireMessage& m, BsAgent& agent, OnlineReport& rep) {
  if (m.type != MsgType::kActorParams) return;
  MlpParams p = decode_actor_params(m);
  ++rep.versions_received;
  if (p.version <= agent.version()) rep.versions_monotone = false;
  agent.install(std::move(p));
}

}  // namespace

OnlineReport run_bs(const SystemConfig& env_cfg, const MlpParams& initial_actor, MessageChannel& ch,
                    const OnlineOptions& opt) {
  env_cfg.validate();
  Environment env(env_cfg, SeedTree(env_cfg.seed).child("online-env"));
  BsAgent agent(env_cfg, opt.deadline);
  agent.install(initial_actor);
  OnlineReport rep;
  MetricsWindow window(env_cfg.users);
  const int per_window = std::max(env_cfg.metrics_window_episodes, 1);
  const std::size_t upload = static_cast<std::size_t>(std::max(env_cfg.upload_batch, 1));
  std::vector<Transition> pending;
  double latency_sum = 0.0;
  std::int64_t delivered = 0;
  std::int64_t slot = 0;

  // every message gets exactly one reply
  std::int64_t sent = 0, replies = 0;
  auto exchange = [&](const WireMessage& out) {
    ch.send(out);
    ++sent;
    if (opt.lockstep) {
      auto reply = ch.receive(std::chrono::seconds(120));
      if (!reply) throw std::runtime_error("run_bs: server did not reply in time");
      take_reply(*reply, agent, rep);
      ++replies;
    }
  };

  for (int e = 0; e < opt.episodes; ++e) {
    env.reset();
    for (int t = 0; t < env_cfg.episode_slots; ++t, ++slot) {
      const NetworkState state = env.state();
      const AgentDecision dec = agent.step(state);
      const StepResult step = env.step(dec.action);
      window.add(step);
      if (dec.deadline_miss) window.add_deadline_miss();
      for (int k = 0; k < env_cfg.users; ++k) {
        if (step.deliveries[k] == 0) continue;
        const int d = quantize_hol(step.hol_before[k] * env_cfg.tti_seconds, env_cfg.tti_seconds);
        latency_sum += d * env_cfg.tti_seconds + env_cfg.d_other_seconds;
        ++delivered;
      }
      if (opt.frozen) continue;
      pending.push_back(make_transition(state, dec.actor_output, step, false, slot));
      // per-slot flush, split into messages of at most upload_batch transitions
      for (std::size_t i = 0; i < pending.size(); i += upload) {
        const std::size_t n = std::min(upload, pending.size() - i);
        exchange(encode_transition_batch(std::span(pending).subspan(i, n), env_cfg.users));
      }
      pending.clear();
      if (!opt.lockstep) {
        while (auto m = ch.receive(Clock::duration::zero())) {
          take_reply(*m, agent, rep);
          ++replies;
        }
      }
    }
    if ((e + 1) % per_window == 0 || e + 1 == opt.episodes) {
      rep.windows.push_back(window.finish(static_cast<int>(rep.windows.size())));
      window.clear();
      if (!opt.frozen) exchange(encode_metrics_report(rep.windows.back()));
    }
  }
  if (!opt.lockstep) {
    // collect the outstanding replies so the server has consumed every upload
    while (replies < sent) {
      auto m = ch.receive(std::chrono::seconds(120));
      if (!m) throw std::runtime_error("run_bs: server stopped replying");
      take_reply(*m, agent, rep);
      ++replies;
    }
  }
  rep.deadline_misses = agent.deadline_misses();
  rep.final_version = agent.version();
  rep.mean_reported_latency_s = delivered > 0 ? latency_sum / static_cast<double>(delivered) : 0.0;
  rep.final_actor = agent.actor() ? *agent.actor() : initial_actor;
  return rep;
}

OnlineReport run_online(const SystemConfig& env_cfg, const Networks& init, const OnlineOptions& opt) {
  if (opt.frozen) {
    auto [a, b] = make_inprocess_pair();
    return run_bs(env_cfg, init.actor, *a, opt);
  }
  EdgeServer server(env_cfg, init);
  std::atomic<bool> stop{false};
  std::unique_ptr<MessageChannel> bs_end;
  std::unique_ptr<MessageChannel> server_end;
  std::unique_ptr<TcpListener> listener;
  if (opt.transport == Transport::kInProcess) {
    auto pair = make_inprocess_pair();
    bs_end = std::move(pair.first);
    server_end = std::move(pair.second);
  } else {
    listener = std::make_unique<TcpListener>(opt.endpoint);
  }

  std::exception_ptr server_failure;
  std::thread server_thread([&] {
    try {
      if (listener) {
        while (!stop.load() && !server_end) server_end = listener->accept(std::chrono::milliseconds(100));
        if (!server_end) return;
      }
      server.serve(*server_end, stop);
    } catch (...) {
      server_failure = std::current_exception();
    }
  });

  OnlineReport rep;
  std::exception_ptr bs_failure;
  try {
    if (listener) {
      Endpoint ep = opt.endpoint;
      ep.port = listener->port();
      bs_end = tcp_connect(ep, std::chrono::seconds(10));
    }
    rep = run_bs(env_cfg, init.actor, *bs_end, opt);
  } catch (...) {
    bs_failure = std::current_exception();
  }
  if (bs_end) bs_end->close();
  // on success the server drains the uploads and returns when it sees the close
  if (bs_failure || !bs_end) stop = true;
  server_thread.join();
  if (server_failure) std::rethrow_exception(server_failure);
  if (bs_failure) std::rethrow_exception(bs_failure);
  rep.server = server.stats();
  rep.final_actor = server.networks().actor;
  return rep;
}

}  // namespace schedlab
