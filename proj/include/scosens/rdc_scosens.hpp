#pragma once

// S-CoSenS radio duty cycling.
//
// Router cycle: beacon (carries SP and WP lengths) -> SP, radio off -> WP,
// listening and acking leaf data -> TP, burst-forwarding the WP's packets
// to the sink -> next beacon. SP + WP is the fixed subframe; WP follows a
// clamped sliding average of the measured demand of previous cycles.
//
// Leaf: radio off until a packet is generated, then listen for the next
// beacon, sleep through the announced SP and contend with CSMA/CA from the
// first instant of the WP.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "scosens/mac_csma.hpp"
#include "scosens/radio_medium.hpp"
#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::rdc {

using radio::Frame;
using sim::Duration;
using sim::SimTime;

/// When a leaf checks that a data exchange still fits in the WP.
enum class WindowCheck : std::uint8_t {
  /// Before each csma_send; a started send may run past the WP end.
  BeforeSend,
  /// Also before every transmission inside the send (CCA-clear instant);
  /// a late send is deferred to the next cycle instead.
  BeforeEachTx,
};
std::string_view to_string(WindowCheck check);

struct ScosensParams {
  Duration subframe = 100'000;
  /// Weight of the history in the WP average, in [0, 1].
  double alpha = 0.9;
  Duration wp_min = 10'000;
  Duration wp_max = 90'000;
  Duration wp_initial = 80'000;
  bool tp_enabled = true;
  /// Packets a leaf may send in one WP; 0 means no cap.
  std::size_t leaf_burst_cap = 0;
  WindowCheck window_check = WindowCheck::BeforeSend;

  void validate() const;
};

/// The WP average is kept in fixed point with this many steps per
/// microsecond. Rounding the blend to whole microseconds would stall the
/// average up to 0.5 / (1 - alpha) us away from a constant demand.
inline constexpr std::uint64_t kWpAvgScale = 1024;

/// Sliding-average state: WP-bar_{n-1} and WP_{n-1}.
struct WpState {
  /// WP-bar_{n-1} in units of 1/kWpAvgScale us.
  std::uint64_t avg_wp_scaled = 0;
  Duration last_actual_wp = 0;
  std::uint64_t cycle_index = 0;

  /// Cycle 0 uses wp_initial as both the average and the previous actual.
  static WpState initial(const ScosensParams& params);
  /// Build a state from a whole-microsecond average.
  static WpState from_us(Duration avg_wp, Duration last_actual_wp, std::uint64_t cycle_index = 0);

  /// WP-bar_{n-1} rounded half up to the microsecond.
  Duration avg_wp() const noexcept { return (avg_wp_scaled + kWpAvgScale / 2) / kWpAvgScale; }
  double avg_wp_exact() const noexcept {
    return static_cast<double>(avg_wp_scaled) / static_cast<double>(kWpAvgScale);
  }
};

struct WpSchedule {
  /// WP-bar_n in 1/kWpAvgScale us, before clamping.
  std::uint64_t avg_wp_scaled = 0;
  /// WP-bar_n rounded half up to the microsecond.
  Duration avg_wp = 0;
  /// WP_n = max(wp_min, min(WP-bar_n, wp_max)).
  Duration wp = 0;
};

/// WP-bar_n = alpha * WP-bar_{n-1} + (1 - alpha) * WP_{n-1}, rounded half up
/// at the fixed-point resolution; the scheduled WP is that average rounded
/// half up to the microsecond, then clamped into [wp_min, wp_max].
WpSchedule next_wp(const WpState& state, const ScosensParams& params);

/// State for cycle n+1 once cycle n's WP has run and its demand is known.
WpState advance_wp(const WpState& state, const WpSchedule& scheduled, Duration measured_demand);

/// subframe - wp. Throws std::logic_error if wp exceeds the subframe.
Duration sp_for(Duration wp, const ScosensParams& params);

enum class RouterPhase : std::uint8_t { Idle, Beacon, SP, WP, TP };
std::string_view to_string(RouterPhase phase);

struct QueuedPacket {
  std::uint64_t packet_id = 0;
  NodeId origin = 0;
  std::uint8_t mpdu_len = 0;
};

struct RouterCycleState {
  RouterPhase phase = RouterPhase::Idle;
  SimTime wp_start = 0;
  /// End of the last intact data reception in the current WP.
  std::optional<SimTime> wp_demand_end;
  std::deque<QueuedPacket> queue;
};

/// Time from WP start to the end of the last intact data reception, or
/// wp_min when nothing was received.
Duration measure_wp_demand(const RouterCycleState& cycle, const ScosensParams& params);

/// One completed router cycle, for analysis and tests.
struct CycleLog {
  std::uint64_t index = 0;
  SimTime cycle_start = 0;
  SimTime beacon_start = 0;
  SimTime beacon_end = 0;
  Duration sp = 0;
  Duration wp = 0;
  Duration avg_wp = 0;
  SimTime wp_start = 0;
  SimTime wp_end = 0;
  Duration demand = 0;
  std::size_t received = 0;
  std::size_t forwarded = 0;
  SimTime tp_end = 0;
};

struct RouterHooks {
  /// First intact reception of a data packet at the router.
  std::function<void(const QueuedPacket&)> on_received;
  /// A forwarding attempt to the sink finished.
  std::function<void(const QueuedPacket&, mac::TxOutcome)> on_forwarded;
  /// TP disabled: the WP's packets terminate at the router.
  std::function<void(const QueuedPacket&)> on_terminal;
};

class ScosensRouter {
 public:
  ScosensRouter(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
                NodeId sink, ScosensParams params, mac::CsmaParams csma,
                mac::BackoffDraw draw, sim::TimerGrid timer, RouterHooks hooks = {});
  ScosensRouter(const ScosensRouter&) = delete;
  ScosensRouter& operator=(const ScosensRouter&) = delete;

  /// Begin the first cycle at `at`.
  void start(SimTime at);

  RouterPhase phase() const noexcept { return cycle_.phase; }
  const WpState& wp_state() const noexcept { return wp_state_; }
  const std::vector<CycleLog>& cycles() const noexcept { return cycles_; }
  std::size_t queued() const noexcept { return cycle_.queue.size(); }
  const std::deque<QueuedPacket>& queue() const noexcept { return cycle_.queue; }
  std::uint64_t beacons_sent() const noexcept { return beacons_sent_; }
  const mac::CsmaMac& mac() const noexcept { return csma_; }

 private:
  void on_frame(const Frame& frame);
  void start_cycle();
  void try_beacon();
  void send_beacon();
  void on_beacon_end();
  void begin_wp();
  void end_wp();
  void forward_next();
  std::optional<SimTime> ack_busy_until() const;
  void set_phase(RouterPhase phase);

  sim::Simulator& sim_;
  radio::Medium& medium_;
  Trace& trace_;
  NodeId self_;
  NodeId sink_;
  ScosensParams params_;
  sim::TimerGrid timer_;
  RouterHooks hooks_;
  mac::CsmaMac csma_;
  mac::AckResponder responder_;

  WpState wp_state_;
  WpSchedule schedule_;
  RouterCycleState cycle_;
  CycleLog current_;
  std::vector<CycleLog> cycles_;
  std::uint8_t beacon_seq_ = 0;
  std::uint8_t data_seq_ = 0;
  std::uint64_t beacons_sent_ = 0;
};

enum class LeafPhase : std::uint8_t { Sleep, AwaitBeacon, SleepUntilWp, Contend };
std::string_view to_string(LeafPhase phase);

struct Packet {
  std::uint64_t id = 0;
  NodeId origin = 0;
  SimTime generated = 0;
  std::uint8_t seq = 0;
  int attempts_used = 0;
};

enum class DropReason : std::uint8_t { QueueFull, AttemptsExhausted, ChannelAccess };
std::string_view to_string(DropReason reason);

struct LeafHooks {
  /// The router acknowledged the packet.
  std::function<void(const Packet&)> on_sent;
  std::function<void(const Packet&, DropReason)> on_dropped;
};

struct WpWindow {
  SimTime start = 0;
  SimTime end = 0;
};

class ScosensLeaf {
 public:
  ScosensLeaf(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
              NodeId router, ScosensParams params, mac::CsmaParams csma, mac::BackoffDraw draw,
              sim::TimerGrid timer, std::size_t payload_len, std::size_t queue_capacity,
              LeafHooks hooks = {});
  ScosensLeaf(const ScosensLeaf&) = delete;
  ScosensLeaf& operator=(const ScosensLeaf&) = delete;

  /// Enqueue a freshly generated packet; wakes the radio when asleep.
  void on_packet_arrival(Packet packet);

  LeafPhase phase() const noexcept { return phase_; }
  std::size_t pending() const noexcept { return queue_.size(); }
  const std::deque<Packet>& queue() const noexcept { return queue_; }
  std::optional<WpWindow> window() const noexcept { return window_; }
  /// Instants at which the leaf powered up for a WP.
  const std::vector<SimTime>& wp_wakeups() const noexcept { return wakeups_; }
  const mac::CsmaMac& mac() const noexcept { return csma_; }

 private:
  void on_frame(const Frame& frame);
  void on_beacon(const radio::BeaconPayload& payload);
  void adopt_window(WpWindow window);
  void contend();
  void send_next();
  void on_sent(const mac::SendResult& result);
  void await_next_beacon();
  void set_phase(LeafPhase phase);

  sim::Simulator& sim_;
  radio::Medium& medium_;
  Trace& trace_;
  NodeId self_;
  NodeId router_;
  ScosensParams params_;
  sim::TimerGrid timer_;
  std::size_t payload_len_;
  std::size_t queue_capacity_;
  LeafHooks hooks_;
  mac::CsmaMac csma_;

  LeafPhase phase_ = LeafPhase::Sleep;
  std::deque<Packet> queue_;
  std::optional<WpWindow> window_;
  /// Announced by a beacon heard while a send was still in flight.
  std::optional<WpWindow> next_window_;
  std::size_t sent_this_window_ = 0;
  std::uint8_t next_seq_ = 0;
  std::vector<SimTime> wakeups_;
};

}  // namespace scosens::rdc
