#include "scosens/mac_csma.hpp"

#include <algorithm>
#include <stdexcept>

namespace scosens::mac {

using radio::ChannelState;
using radio::RadioPower;

void CsmaParams::validate() const {
  if (backoff_period == 0 || ack_wait == 0 || turnaround == 0) {
    throw std::invalid_argument("csma: durations must be > 0");
  }
  if (min_be < 0 || max_be > 16 || min_be > max_be) {
    throw std::invalid_argument("csma: need 0 <= min_be <= max_be <= 16");
  }
  if (max_csma_backoffs < 0) {
    throw std::invalid_argument("csma: max_csma_backoffs must be >= 0");
  }
  if (max_frame_attempts < 1) {
    throw std::invalid_argument("csma: max_frame_attempts must be >= 1");
  }
}

std::string_view to_string(TxOutcome outcome) {
  switch (outcome) {
    case TxOutcome::Delivered:
      return "delivered";
    case TxOutcome::ChannelAccessFailure:
      return "channel_access_failure";
    case TxOutcome::NoAck:
      return "no_ack";
    case TxOutcome::Unconfirmed:
      return "unconfirmed";
    case TxOutcome::Deferred:
      return "deferred";
  }
  return "?";
}

BackoffDraw backoff_from(sim::RandomSource& rng) {
  return [&rng](std::uint64_t slots) { return rng.uniform_below(slots); };
}

AckResponder::AckResponder(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
                           Duration turnaround)
    : sim_(sim), medium_(medium), trace_(trace), self_(self), turnaround_(turnaround) {}

AckResponder::Verdict AckResponder::on_frame(const Frame& frame) {
  if (!frame.carries_data()) {
    return Verdict::NotForUs;
  }
  if (frame.is_broadcast()) {
    return Verdict::Broadcast;
  }
  if (frame.dst != self_) {
    return Verdict::NotForUs;
  }
  const NodeId src = frame.src;
  const std::uint8_t seq = frame.seq;
  ack_until_ = sim_.now() + turnaround_ + radio::frame_airtime(radio::kAckMpduLen);
  sim_.schedule_in(turnaround_, [this, src, seq] { transmit_ack(src, seq); });

  auto it = last_seq_.find(src);
  if (it != last_seq_.end() && it->second == seq) {
    return Verdict::Duplicate;
  }
  last_seq_[src] = seq;
  return Verdict::Deliver;
}

std::optional<SimTime> AckResponder::ack_busy_until() const {
  if (ack_until_ && *ack_until_ > sim_.now()) {
    return ack_until_;
  }
  return std::nullopt;
}

void AckResponder::transmit_ack(NodeId dst, std::uint8_t seq) {
  if (medium_.power(self_) != RadioPower::Listening) {
    ++acks_skipped_;
    trace_.record(sim_.now(), self_, TraceKind::State)
        .field("mac", "ack_skipped")
        .field("dst", dst)
        .field("seq", static_cast<unsigned>(seq));
    return;
  }
  trace_.record(sim_.now(), self_, TraceKind::Ack)
      .field("dst", dst)
      .field("seq", static_cast<unsigned>(seq));
  medium_.begin_tx(self_, radio::make_ack_frame(self_, dst, seq));
  ++acks_sent_;
}

CsmaMac::CsmaMac(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
                 CsmaParams params, BackoffDraw draw)
    : sim_(sim),
      medium_(medium),
      trace_(trace),
      self_(self),
      params_(params),
      draw_(std::move(draw)) {
  params_.validate();
}

void CsmaMac::send(SendRequest request, SendCallback done) {
  if (in_flight_) {
    throw radio::ProtocolViolation("csma_send while another send is in flight");
  }
  if (medium_.power(self_) != RadioPower::Listening) {
    throw radio::ProtocolViolation("csma_send requires a listening radio");
  }
  if (request.attempts_used >= params_.max_frame_attempts) {
    throw std::invalid_argument("csma_send: frame has no attempts left");
  }
  in_flight_ = true;
  request_ = std::move(request);
  request_.frame.src = self_;
  done_ = std::move(done);
  attempts_used_ = request_.attempts_used;
  transmissions_ = 0;
  start_attempt();
}

void CsmaMac::start_attempt() {
  ++attempts_used_;
  nb_ = 0;
  be_ = params_.min_be;
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "attempt")
      .field("n", attempts_used_)
      .field("seq", static_cast<unsigned>(request_.frame.seq));
  backoff();
}

void CsmaMac::backoff() {
  const std::uint64_t slots = std::uint64_t{1} << be_;
  const std::uint64_t drawn = draw_(slots);
  if (drawn >= slots) {
    throw std::logic_error("backoff draw out of range");
  }
  const Duration delay = drawn * params_.backoff_period;
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "backoff")
      .field("be", be_)
      .field("slots", drawn)
      .field("delay", delay);
  backoff_timer_ = sim_.schedule_in(delay, [this] { on_backoff_done(); });
}

void CsmaMac::cut_off() {
  if (!in_flight_) {
    return;
  }
  request_.deadline = sim_.now();
  if (backoff_timer_ != 0 && sim_.cancel(backoff_timer_)) {
    backoff_timer_ = 0;
    --attempts_used_;
    finish(TxOutcome::Deferred);
  }
}

void CsmaMac::on_backoff_done() {
  backoff_timer_ = 0;
  // The radio may be busy sending an ack for someone else's frame.
  const bool can_sense = medium_.power(self_) == RadioPower::Listening;
  const ChannelState cs = can_sense ? medium_.cca(self_) : ChannelState::Busy;
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "cca")
      .field("result", cs == ChannelState::Clear ? "clear" : "busy");
  if (cs == ChannelState::Busy) {
    on_channel_busy();
    return;
  }
  const Duration airtime = radio::frame_airtime(request_.frame.mpdu_len);
  const Duration ack_part = request_.frame.is_broadcast() ? 0 : params_.ack_wait;
  if (request_.deadline &&
      sim_.now() + params_.turnaround + airtime + ack_part > *request_.deadline) {
    --attempts_used_;  // nothing went on air
    finish(TxOutcome::Deferred);
    return;
  }
  sim_.schedule_in(params_.turnaround, [this] { transmit(); });
}

void CsmaMac::on_channel_busy() {
  ++nb_;
  be_ = std::min(be_ + 1, params_.max_be);
  if (nb_ > params_.max_csma_backoffs) {
    ++caf_total_;
    attempt_failed(TxOutcome::ChannelAccessFailure);
    return;
  }
  backoff();
}

void CsmaMac::transmit() {
  if (medium_.power(self_) != RadioPower::Listening) {
    on_channel_busy();
    return;
  }
  ++transmissions_;
  ++transmissions_total_;
  medium_.begin_tx(self_, request_.frame, [this] { on_tx_end(); });
}

void CsmaMac::on_tx_end() {
  if (request_.frame.is_broadcast()) {
    finish(TxOutcome::Unconfirmed);
    return;
  }
  awaiting_ack_ = true;
  ack_timer_ = sim_.schedule_in(params_.ack_wait, [this] { on_ack_timeout(); });
}

bool CsmaMac::on_ack(const Frame& ack) {
  if (!in_flight_ || !awaiting_ack_ || ack.kind != radio::FrameKind::Ack || ack.dst != self_ ||
      ack.seq != request_.frame.seq) {
    return false;
  }
  sim_.cancel(ack_timer_);
  awaiting_ack_ = false;
  finish(TxOutcome::Delivered);
  return true;
}

void CsmaMac::on_ack_timeout() {
  awaiting_ack_ = false;
  attempt_failed(TxOutcome::NoAck);
}

void CsmaMac::attempt_failed(TxOutcome why) {
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "attempt_failed")
      .field("n", attempts_used_)
      .field("why", to_string(why));
  const bool retry = why != TxOutcome::ChannelAccessFailure || params_.retry_after_caf;
  if (!retry || attempts_used_ >= params_.max_frame_attempts) {
    finish(why);
    return;
  }
  start_attempt();
}

void CsmaMac::finish(TxOutcome outcome) {
  in_flight_ = false;
  SendResult result{outcome, transmissions_, attempts_used_};
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "outcome")
      .field("result", to_string(outcome))
      .field("tx", transmissions_)
      .field("attempts", attempts_used_);
  SendCallback done = std::move(done_);
  done_ = nullptr;
  if (done) {
    done(result);
  }
}

}  // namespace scosens::mac
