#pragma once

// Unslotted 802.15.4 CSMA/CA with binary exponential backoff, acks and a
// bounded number of frame attempts. Both RDC layers use it for channel
// access and acknowledgement handling.

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "scosens/radio_medium.hpp"
#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::mac {

using radio::Frame;
using sim::Duration;
using sim::SimTime;

struct CsmaParams {
  Duration backoff_period = 320;
  int min_be = 3;
  int max_be = 5;
  int max_csma_backoffs = 4;
  /// Total transmissions of one frame, first try included.
  int max_frame_attempts = 8;
  /// Measured from the end of the data frame.
  Duration ack_wait = 864;
  /// RX/TX turnaround: CCA-to-transmit and frame-end-to-ack.
  Duration turnaround = 192;
  /// A channel access failure consumes one frame attempt and the frame is
  /// retried; when false it ends the send immediately.
  bool retry_after_caf = true;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

enum class TxOutcome : std::uint8_t {
  Delivered,
  ChannelAccessFailure,
  NoAck,
  /// Broadcast sent; nobody acknowledges broadcasts.
  Unconfirmed,
  /// The next transmission could not complete before the caller's deadline.
  Deferred,
};
std::string_view to_string(TxOutcome outcome);

struct SendRequest {
  Frame frame;
  /// Attempts already spent on this frame by earlier sends (e.g. in a
  /// previous S-CoSenS waiting period).
  int attempts_used = 0;
  /// Transmit only if frame + ack wait completes by this instant.
  std::optional<SimTime> deadline;
};

struct SendResult {
  TxOutcome outcome = TxOutcome::NoAck;
  /// Transmissions made during this send.
  int transmissions = 0;
  /// Cumulative attempts including SendRequest::attempts_used.
  int attempts_used = 0;
};

using SendCallback = std::function<void(const SendResult&)>;
/// Returns a backoff slot count drawn uniformly from [0, slots).
using BackoffDraw = std::function<std::uint64_t(std::uint64_t slots)>;

BackoffDraw backoff_from(sim::RandomSource& rng);

/// Receive side of the MAC: acknowledges unicast data addressed to this node
/// after the turnaround and filters duplicates by (src, seq).
class AckResponder {
 public:
  enum class Verdict { NotForUs, Deliver, Duplicate, Broadcast };

  AckResponder(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
               Duration turnaround);

  /// Call for every intact frame. Schedules the ack when appropriate.
  Verdict on_frame(const Frame& frame);

  /// End instant of the most recent ack, once scheduled.
  std::optional<SimTime> ack_busy_until() const;
  std::uint64_t acks_sent() const noexcept { return acks_sent_; }
  std::uint64_t acks_skipped() const noexcept { return acks_skipped_; }

 private:
  void transmit_ack(NodeId dst, std::uint8_t seq);

  sim::Simulator& sim_;
  radio::Medium& medium_;
  Trace& trace_;
  NodeId self_;
  Duration turnaround_;
  std::unordered_map<NodeId, std::uint8_t> last_seq_;
  std::optional<SimTime> ack_until_;
  std::uint64_t acks_sent_ = 0;
  std::uint64_t acks_skipped_ = 0;
};

class CsmaMac {
 public:
  CsmaMac(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
          CsmaParams params, BackoffDraw draw);
  CsmaMac(const CsmaMac&) = delete;
  CsmaMac& operator=(const CsmaMac&) = delete;

  /// Radio must be Listening and no other send in flight (ProtocolViolation
  /// otherwise). `done` runs once with the final outcome.
  void send(SendRequest request, SendCallback done);
  bool in_flight() const noexcept { return in_flight_; }

  /// Put nothing more on air for the current send. A pending backoff ends
  /// at once with Deferred; a send past its backoff finishes its exchange
  /// and defers at the next clear CCA. No-op when nothing is in flight.
  void cut_off();

  /// Feed every intact Ack frame here. True if it completed the pending send.
  bool on_ack(const Frame& ack);

  const CsmaParams& params() const noexcept { return params_; }
  std::uint64_t transmissions() const noexcept { return transmissions_total_; }
  std::uint64_t channel_access_failures() const noexcept { return caf_total_; }

 private:
  void start_attempt();
  void backoff();
  void on_backoff_done();
  void on_channel_busy();
  void transmit();
  void on_tx_end();
  void on_ack_timeout();
  void attempt_failed(TxOutcome why);
  void finish(TxOutcome outcome);

  sim::Simulator& sim_;
  radio::Medium& medium_;
  Trace& trace_;
  NodeId self_;
  CsmaParams params_;
  BackoffDraw draw_;

  bool in_flight_ = false;
  SendRequest request_;
  SendCallback done_;
  int be_ = 0;
  int nb_ = 0;
  int attempts_used_ = 0;
  int transmissions_ = 0;
  bool awaiting_ack_ = false;
  sim::EventId ack_timer_ = 0;
  sim::EventId backoff_timer_ = 0;
  std::uint64_t transmissions_total_ = 0;
  std::uint64_t caf_total_ = 0;
};

}  // namespace scosens::mac
