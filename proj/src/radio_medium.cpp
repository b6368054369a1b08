#include "scosens/radio_medium.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace scosens::radio {

namespace {

std::string node_msg(std::string_view what, NodeId node) {
  std::ostringstream os;
  os << what << " (node " << node << ")";
  return os.str();
}

}  // namespace

std::string_view to_string(FrameKind kind) {
  switch (kind) {
    case FrameKind::Data:
      return "data";
    case FrameKind::Ack:
      return "ack";
    case FrameKind::Beacon:
      return "beacon";
    case FrameKind::Strobe:
      return "strobe";
  }
  return "?";
}

std::array<std::uint8_t, 8> BeaconPayload::encode() const {
  std::array<std::uint8_t, 8> out{};
  for (int i = 0; i < 4; ++i) {
    out[i] = static_cast<std::uint8_t>(sp_us >> (8 * i));
    out[4 + i] = static_cast<std::uint8_t>(wp_us >> (8 * i));
  }
  return out;
}

BeaconPayload BeaconPayload::decode(std::span<const std::uint8_t, 8> bytes) {
  BeaconPayload p;
  for (int i = 0; i < 4; ++i) {
    p.sp_us |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    p.wp_us |= static_cast<std::uint32_t>(bytes[4 + i]) << (8 * i);
  }
  return p;
}

Frame make_data_frame(NodeId src, NodeId dst, std::uint8_t seq, std::size_t payload_len,
                      std::uint64_t packet_id) {
  if (payload_len + kDataHeaderLen > kMaxMpduLen) {
    throw std::invalid_argument("data payload does not fit in a 127-byte MPDU");
  }
  Frame f;
  f.kind = FrameKind::Data;
  f.src = src;
  f.dst = dst;
  f.seq = seq;
  f.mpdu_len = static_cast<std::uint8_t>(payload_len + kDataHeaderLen);
  f.packet_id = packet_id;
  return f;
}

Frame make_ack_frame(NodeId src, NodeId dst, std::uint8_t seq) {
  Frame f;
  f.kind = FrameKind::Ack;
  f.src = src;
  f.dst = dst;
  f.seq = seq;
  f.mpdu_len = kAckMpduLen;
  return f;
}

Frame make_beacon_frame(NodeId src, std::uint8_t seq, BeaconPayload payload) {
  Frame f;
  f.kind = FrameKind::Beacon;
  f.src = src;
  f.dst = kBroadcast;
  f.seq = seq;
  f.mpdu_len = kBeaconMpduLen;
  f.beacon = payload;
  return f;
}

void validate_frame(const Frame& frame) {
  if (frame.mpdu_len > kMaxMpduLen) {
    throw ProtocolViolation("frame exceeds 127-byte MPDU");
  }
  if (frame.kind == FrameKind::Beacon && !frame.beacon) {
    throw ProtocolViolation("beacon frame without SP/WP payload");
  }
  if (frame.kind == FrameKind::Ack && frame.mpdu_len != kAckMpduLen) {
    throw ProtocolViolation("ack frame must be 5 bytes");
  }
}

Duration frame_airtime(std::size_t mpdu_len) {
  if (mpdu_len > kMaxMpduLen) {
    throw std::invalid_argument("frame_airtime: MPDU longer than 127 bytes");
  }
  return (kPhyHeaderLen + mpdu_len) * kByteDuration;
}

void Medium::attach(NodeId node, RxHandler handler) {
  if (node == kBroadcast) {
    throw std::invalid_argument("node id 0xFFFF is reserved for broadcast");
  }
  if (ports_.size() <= node) {
    ports_.resize(static_cast<std::size_t>(node) + 1);
  }
  Port& p = ports_[node];
  if (p.attached) {
    throw std::invalid_argument(node_msg("node attached twice", node));
  }
  p.attached = true;
  p.state.node = node;
  p.handler = std::move(handler);
  attached_order_.push_back(node);
}

bool Medium::is_attached(NodeId node) const {
  return node < ports_.size() && ports_[node].attached;
}

Medium::Port& Medium::port(NodeId node) {
  if (!is_attached(node)) {
    throw std::out_of_range(node_msg("unknown node", node));
  }
  return ports_[node];
}

const Medium::Port& Medium::port(NodeId node) const {
  if (!is_attached(node)) {
    throw std::out_of_range(node_msg("unknown node", node));
  }
  return ports_[node];
}

RadioPower Medium::power(NodeId node) const { return port(node).state.power; }

const RadioState& Medium::radio_state(NodeId node) const { return port(node).state; }

void Medium::set_radio(NodeId node, RadioPower power) {
  Port& p = port(node);
  RadioState& st = p.state;
  if (power == RadioPower::Transmitting) {
    throw ProtocolViolation(node_msg("Transmitting is entered through begin_tx", node));
  }
  if (st.power == RadioPower::Transmitting) {
    throw ProtocolViolation(node_msg("radio state changed during a transmission", node));
  }
  if (st.power == power) {
    return;
  }
  const SimTime now = sim_.now();
  if (power == RadioPower::Off) {
    st.accumulated_on += now - st.on_since;
    drop_candidate(node, /*corrupt=*/false);
    trace_.record(now, node, TraceKind::RadioOff);
  } else {
    st.on_since = now;
    trace_.record(now, node, TraceKind::RadioOn);
  }
  st.power = power;
}

void Medium::drop_candidate(NodeId node, bool corrupt) {
  for (auto& a : active_) {
    auto it = std::find(a.receivers.begin(), a.receivers.end(), node);
    if (it != a.receivers.end()) {
      a.receivers.erase(it);
      if (corrupt) {
        // Half-duplex: the node's own transmission overlaps this frame.
        a.self_blocked.push_back(node);
      }
    }
  }
}

TransmissionRecord Medium::begin_tx(NodeId node, Frame frame, std::function<void()> on_end) {
  Port& p = port(node);
  if (p.state.power == RadioPower::Off) {
    throw ProtocolViolation(node_msg("begin_tx with radio off", node));
  }
  if (p.state.power == RadioPower::Transmitting) {
    throw ProtocolViolation(node_msg("begin_tx while already transmitting", node));
  }
  validate_frame(frame);
  const SimTime now = sim_.now();
  frame.uid = next_uid_++;
  ++tx_count_;

  drop_candidate(node, /*corrupt=*/true);
  p.state.power = RadioPower::Transmitting;

  Active a;
  a.record = TransmissionRecord{frame, now, now + frame_airtime(frame.mpdu_len)};
  a.on_end = std::move(on_end);
  for (NodeId other : attached_order_) {
    if (other == node) {
      continue;
    }
    ++ports_[other].counters.transmitted_by_others;
    const RadioPower pw = ports_[other].state.power;
    // A transmitter whose frame ends at this very instant is listening from
    // now on; [start, end) intervals do not overlap.
    const bool ending_now = pw == RadioPower::Transmitting && tx_end_of(other) == now;
    if (pw == RadioPower::Listening || ending_now) {
      a.receivers.push_back(other);
    }
  }
  bool overlaps = false;
  for (auto& other : active_) {
    if (other.record.end > now) {
      overlaps = true;
      if (!other.collided) {
        other.collided = true;
        ++collided_count_;
      }
    }
  }
  if (overlaps) {
    a.collided = true;
    ++collided_count_;
  }

  trace_.record(now, node, TraceKind::TxStart)
      .field("uid", frame.uid)
      .field("kind", to_string(frame.kind))
      .field("dst", frame.dst)
      .field("seq", static_cast<unsigned>(frame.seq))
      .field("len", static_cast<unsigned>(frame.mpdu_len))
      .field("end", a.record.end);

  TransmissionRecord record = a.record;
  const std::uint64_t uid = frame.uid;
  active_.push_back(std::move(a));
  sim_.schedule(record.end, [this, uid] { finish_tx(uid); });
  return record;
}

void Medium::finish_tx(std::uint64_t uid) {
  auto it = std::find_if(active_.begin(), active_.end(),
                         [uid](const Active& a) { return a.record.frame.uid == uid; });
  if (it == active_.end()) {
    throw std::logic_error("finish_tx for unknown transmission");
  }
  Active done = std::move(*it);
  active_.erase(it);

  const SimTime now = sim_.now();
  const Frame& frame = done.record.frame;
  last_tx_end_ = now;
  any_tx_ended_ = true;

  Port& tx = port(frame.src);
  tx.state.power = RadioPower::Listening;
  trace_.record(now, frame.src, TraceKind::TxEnd).field("uid", frame.uid);

  std::vector<NodeId> delivered;
  for (NodeId other : attached_order_) {
    if (other == frame.src) {
      continue;
    }
    Port& rx = ports_[other];
    const bool eligible =
        std::find(done.receivers.begin(), done.receivers.end(), other) != done.receivers.end();
    const bool self_blocked = std::find(done.self_blocked.begin(), done.self_blocked.end(),
                                        other) != done.self_blocked.end();
    if (!eligible && !self_blocked) {
      ++rx.counters.missed;
      continue;
    }
    if (done.collided || self_blocked) {
      ++rx.counters.corrupted;
      trace_.record(now, other, TraceKind::RxCollision).field("uid", frame.uid);
    } else {
      ++rx.counters.delivered;
      trace_.record(now, other, TraceKind::RxOk)
          .field("uid", frame.uid)
          .field("src", frame.src)
          .field("kind", to_string(frame.kind));
      delivered.push_back(other);
    }
  }
  for (NodeId n : delivered) {
    if (ports_[n].handler) {
      ports_[n].handler(frame);
    }
  }
  if (done.on_end) {
    done.on_end();
  }
}

ChannelState Medium::cca(NodeId node) const {
  const Port& p = port(node);
  if (p.state.power != RadioPower::Listening) {
    throw ProtocolViolation(node_msg("CCA requires a listening radio", node));
  }
  return on_air_now() ? ChannelState::Busy : ChannelState::Clear;
}

bool Medium::on_air_now() const {
  const SimTime now = sim_.now();
  return std::any_of(active_.begin(), active_.end(),
                     [now](const Active& a) { return a.record.end > now; });
}

bool Medium::activity_since(SimTime since) const {
  return !active_.empty() || (any_tx_ended_ && last_tx_end_ > since);
}

std::optional<SimTime> Medium::channel_busy_until() const {
  std::optional<SimTime> until;
  for (const auto& a : active_) {
    if (a.record.end > sim_.now() && (!until || a.record.end > *until)) {
      until = a.record.end;
    }
  }
  return until;
}

std::optional<SimTime> Medium::tx_end_of(NodeId node) const {
  for (const auto& a : active_) {
    if (a.record.frame.src == node) {
      return a.record.end;
    }
  }
  return std::nullopt;
}

Duration Medium::on_time(NodeId node) const {
  const RadioState& st = port(node).state;
  Duration total = st.accumulated_on;
  if (st.power != RadioPower::Off) {
    total += sim_.now() - st.on_since;
  }
  return total;
}

const ReceptionCounters& Medium::counters(NodeId node) const { return port(node).counters; }

}  // namespace scosens::radio
