#pragma once

// Simplified ContikiMAC-style low-power listening, used as the comparison
// baseline ("LPL-like"; no phase lock, no fast sleep, no burst mode).
//
// Receiver: every check_interval the radio listens for check_duration. If
// any transmission overlapped the check, it stays on until a whole frame
// has been received (and acked, when addressed to it) or listen_timeout.
//
// Sender: one CCA, then the full frame is repeated with strobe_gap pauses
// for at most check_interval + one airtime, listening for an ack in every
// pause. A failed attempt is retried after a random delay measured in check
// intervals, as Contiki's CSMA layer does, up to max_frame_attempts.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string_view>

#include "scosens/mac_csma.hpp"
#include "scosens/radio_medium.hpp"
#include "scosens/rdc_scosens.hpp"
#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::rdc {

struct LplParams {
  Duration check_interval = 125'000;
  Duration check_duration = 1'000;
  Duration strobe_gap = 400;
  int max_frame_attempts = 8;
  /// Longest stay-on after energy was detected without a whole frame.
  Duration listen_timeout = 10'000;
  /// Retry delay unit; 0 means check_interval.
  Duration retry_backoff_unit = 0;

  void validate() const;
};

enum class LplPhase : std::uint8_t { Sleep, Check, StayOn, Sending };
std::string_view to_string(LplPhase phase);

struct LplHooks {
  /// First intact reception of a data frame addressed to (or broadcast to)
  /// this node.
  std::function<void(const Frame&)> on_received;
};

class LplNode {
 public:
  LplNode(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
          LplParams params, Duration turnaround, sim::RandomSource& rng, sim::TimerGrid timer,
          LplHooks hooks = {});
  LplNode(const LplNode&) = delete;
  LplNode& operator=(const LplNode&) = delete;

  /// Start periodic channel checks; the first one happens at `first_check`.
  void start(SimTime first_check);

  /// lpl_send. ProtocolViolation if a send is already in progress.
  void send(mac::SendRequest request, mac::SendCallback done);
  bool sending() const noexcept { return send_active_; }

  LplPhase phase() const noexcept { return phase_; }
  const LplParams& params() const noexcept { return params_; }
  std::uint64_t checks_done() const noexcept { return checks_done_; }
  std::uint64_t strobes_sent() const noexcept { return strobes_total_; }
  /// Attempts abandoned because the initial CCA found the channel busy.
  std::uint64_t channel_access_failures() const noexcept { return caf_total_; }

 private:
  void on_frame(const Frame& frame);
  void do_check();
  void check_end();
  void go_idle();
  void start_attempt();
  void send_copy();
  void after_copy();
  void gap_end();
  void attempt_failed(mac::TxOutcome why);
  void finish(mac::TxOutcome outcome);
  void set_phase(LplPhase phase);
  void cancel_rx_timer();

  sim::Simulator& sim_;
  radio::Medium& medium_;
  Trace& trace_;
  NodeId self_;
  LplParams params_;
  Duration turnaround_;
  sim::RandomSource& rng_;
  sim::TimerGrid timer_;
  LplHooks hooks_;
  mac::AckResponder responder_;

  LplPhase phase_ = LplPhase::Sleep;
  SimTime next_check_ = 0;
  SimTime check_start_ = 0;
  sim::EventId rx_timer_ = 0;
  std::uint64_t checks_done_ = 0;

  bool send_active_ = false;
  bool attempt_pending_ = false;
  mac::SendRequest request_;
  mac::SendCallback done_;
  int attempts_used_ = 0;
  int transmissions_ = 0;
  SimTime train_start_ = 0;
  sim::EventId gap_timer_ = 0;
  bool awaiting_ack_ = false;
  std::uint64_t strobes_total_ = 0;
  std::uint64_t caf_total_ = 0;
};

/// FIFO of packets sent one at a time to a fixed next hop through LPL.
class LplForwarder {
 public:
  LplForwarder(LplNode& node, NodeId self, NodeId next_hop, std::size_t capacity,
               LeafHooks hooks = {});

  /// Enqueue; `mpdu_len` is the data frame length to use for this packet.
  void enqueue(Packet packet, std::uint8_t mpdu_len);
  struct Entry {
    Packet packet;
    std::uint8_t mpdu_len;
  };

  std::size_t pending() const noexcept { return queue_.size(); }
  /// Head first; the head is the packet being sent, if any.
  const std::deque<Entry>& queue() const noexcept { return queue_; }

 private:
  void send_next();

  LplNode& node_;
  NodeId self_;
  NodeId next_hop_;
  std::size_t capacity_;
  LeafHooks hooks_;
  std::deque<Entry> queue_;
  std::uint8_t next_seq_ = 0;
};

/// Always-listening destination: acks unicast data and reports each new
/// packet once.
class Sink {
 public:
  Sink(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
       Duration turnaround, std::function<void(const Frame&)> on_delivered = {});
  Sink(const Sink&) = delete;
  Sink& operator=(const Sink&) = delete;

  std::uint64_t delivered() const noexcept { return delivered_; }

 private:
  mac::AckResponder responder_;
  std::function<void(const Frame&)> on_delivered_;
  std::uint64_t delivered_ = 0;
};

}  // namespace scosens::rdc
