#pragma once

// Single collision domain 802.15.4-style radio: 250 kbit/s airtime, on/off
// accounting, overlap-based collisions (no capture), instantaneous CCA.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::radio {

using sim::Duration;
using sim::SimTime;

inline constexpr NodeId kBroadcast = 0xFFFF;

inline constexpr std::size_t kMaxMpduLen = 127;
/// Preamble (4) + SFD (1) + PHY length (1).
inline constexpr std::size_t kPhyHeaderLen = 6;
inline constexpr Duration kByteDuration = 32;
inline constexpr std::size_t kAckMpduLen = 5;
/// Frame control (2) + seq (1) + FCS (2) + sp_us (4) + wp_us (4).
inline constexpr std::size_t kBeaconMpduLen = 13;
/// Frame control (2) + seq (1) + PAN id (2) + dst (2) + src (2) + FCS (2).
inline constexpr std::size_t kDataHeaderLen = 11;

/// A radio-layer programming error, e.g. transmitting with the radio off.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class FrameKind : std::uint8_t { Data, Ack, Beacon, Strobe };
std::string_view to_string(FrameKind kind);

/// Cycle timing announced by an S-CoSenS router.
struct BeaconPayload {
  std::uint32_t sp_us = 0;
  std::uint32_t wp_us = 0;

  /// sp_us then wp_us, each unsigned 32-bit little-endian.
  std::array<std::uint8_t, 8> encode() const;
  static BeaconPayload decode(std::span<const std::uint8_t, 8> bytes);

  friend bool operator==(const BeaconPayload&, const BeaconPayload&) = default;
};

struct Frame {
  FrameKind kind = FrameKind::Data;
  NodeId src = 0;
  NodeId dst = kBroadcast;
  std::uint8_t mpdu_len = 0;
  std::uint8_t seq = 0;
  std::optional<BeaconPayload> beacon;
  /// Application packet carried by Data/Strobe frames; 0 when none.
  std::uint64_t packet_id = 0;
  /// Assigned by the medium when the frame goes on air.
  std::uint64_t uid = 0;

  bool is_broadcast() const noexcept { return dst == kBroadcast; }
  /// Data and strobe copies carry a packet and are acknowledged when unicast.
  bool carries_data() const noexcept {
    return kind == FrameKind::Data || kind == FrameKind::Strobe;
  }
};

Frame make_data_frame(NodeId src, NodeId dst, std::uint8_t seq, std::size_t payload_len,
                      std::uint64_t packet_id);
Frame make_ack_frame(NodeId src, NodeId dst, std::uint8_t seq);
Frame make_beacon_frame(NodeId src, std::uint8_t seq, BeaconPayload payload);

/// Throws ProtocolViolation if a frame breaks its kind's invariants.
void validate_frame(const Frame& frame);

/// (6 + mpdu_len) * 32 us. Throws std::invalid_argument above 127 bytes.
Duration frame_airtime(std::size_t mpdu_len);

enum class RadioPower : std::uint8_t { Off, Listening, Transmitting };
enum class ChannelState : std::uint8_t { Clear, Busy };

struct RadioState {
  NodeId node = 0;
  RadioPower power = RadioPower::Off;
  SimTime on_since = 0;
  Duration accumulated_on = 0;
};

struct TransmissionRecord {
  Frame frame;
  SimTime start = 0;
  SimTime end = 0;
};

/// Per-receiver bookkeeping for the conservation identity
/// delivered + corrupted + missed = transmitted (by other nodes).
struct ReceptionCounters {
  std::uint64_t transmitted_by_others = 0;
  std::uint64_t delivered = 0;
  std::uint64_t corrupted = 0;
  std::uint64_t missed = 0;
};

class Medium {
 public:
  /// Invoked at the end instant of every frame received intact.
  using RxHandler = std::function<void(const Frame&)>;

  Medium(sim::Simulator& sim, Trace& trace) : sim_(sim), trace_(trace) {}
  Medium(const Medium&) = delete;
  Medium& operator=(const Medium&) = delete;

  void attach(NodeId node, RxHandler handler);
  bool is_attached(NodeId node) const;

  /// Off <-> Listening. Transmitting is entered and left through begin_tx.
  void set_radio(NodeId node, RadioPower power);
  RadioPower power(NodeId node) const;
  bool is_transmitting(NodeId node) const { return power(node) == RadioPower::Transmitting; }
  const RadioState& radio_state(NodeId node) const;

  /// Put `frame` on air now. `on_end` runs after deliveries at the frame's
  /// end instant, with the transmitter back in Listening.
  TransmissionRecord begin_tx(NodeId node, Frame frame, std::function<void()> on_end = {});

  /// Busy iff a transmission is in progress now; intervals are [start, end).
  ChannelState cca(NodeId node) const;
  /// True if any transmission overlapped [since, now].
  bool activity_since(SimTime since) const;
  /// Latest end instant among transmissions on air now.
  std::optional<SimTime> channel_busy_until() const;
  /// End instant of the transmission currently on air from `node`.
  std::optional<SimTime> tx_end_of(NodeId node) const;

  /// Radio-on time including the currently open interval.
  Duration on_time(NodeId node) const;

  const ReceptionCounters& counters(NodeId node) const;
  std::uint64_t transmissions() const noexcept { return tx_count_; }
  std::uint64_t collided_transmissions() const noexcept { return collided_count_; }

 private:
  struct Port {
    RadioState state;
    RxHandler handler;
    ReceptionCounters counters;
    bool attached = false;
  };
  struct Active {
    TransmissionRecord record;
    bool collided = false;
    /// Nodes listening since the start instant and still eligible.
    std::vector<NodeId> receivers;
    /// Receivers that started their own transmission mid-frame.
    std::vector<NodeId> self_blocked;
    std::function<void()> on_end;
  };

  Port& port(NodeId node);
  bool on_air_now() const;
  const Port& port(NodeId node) const;
  void drop_candidate(NodeId node, bool corrupt);
  void finish_tx(std::uint64_t uid);

  sim::Simulator& sim_;
  Trace& trace_;
  std::vector<Port> ports_;
  std::vector<NodeId> attached_order_;
  std::vector<Active> active_;
  std::uint64_t next_uid_ = 1;
  std::uint64_t tx_count_ = 0;
  std::uint64_t collided_count_ = 0;
  SimTime last_tx_end_ = 0;
  bool any_tx_ended_ = false;
};

}  // namespace scosens::radio
