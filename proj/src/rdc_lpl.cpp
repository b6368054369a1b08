#include "scosens/rdc_lpl.hpp"

#include <algorithm>
#include <stdexcept>

namespace scosens::rdc {

using radio::RadioPower;

void LplParams::validate() const {
  if (check_interval == 0 || check_duration == 0 || strobe_gap == 0 || listen_timeout == 0) {
    throw std::invalid_argument("lpl: durations must be > 0");
  }
  if (check_duration >= check_interval) {
    throw std::invalid_argument("lpl: check_duration must be shorter than check_interval");
  }
  if (max_frame_attempts < 1) {
    throw std::invalid_argument("lpl: max_frame_attempts must be >= 1");
  }
}

std::string_view to_string(LplPhase phase) {
  switch (phase) {
    case LplPhase::Sleep:
      return "sleep";
    case LplPhase::Check:
      return "check";
    case LplPhase::StayOn:
      return "stay_on";
    case LplPhase::Sending:
      return "sending";
  }
  return "?";
}

LplNode::LplNode(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
                 LplParams params, Duration turnaround, sim::RandomSource& rng,
                 sim::TimerGrid timer, LplHooks hooks)
    : sim_(sim),
      medium_(medium),
      trace_(trace),
      self_(self),
      params_(params),
      turnaround_(turnaround),
      rng_(rng),
      timer_(timer),
      hooks_(std::move(hooks)),
      responder_(sim, medium, trace, self, turnaround) {
  params_.validate();
  medium_.attach(self_, [this](const Frame& f) { on_frame(f); });
}

void LplNode::set_phase(LplPhase phase) {
  if (phase_ == phase) {
    return;
  }
  phase_ = phase;
  trace_.record(sim_.now(), self_, TraceKind::State).field("lpl", to_string(phase));
}

void LplNode::cancel_rx_timer() {
  if (rx_timer_ != 0) {
    sim_.cancel(rx_timer_);
    rx_timer_ = 0;
  }
}

void LplNode::start(SimTime first_check) {
  next_check_ = first_check;
  sim_.schedule(timer_.next_tick(next_check_), [this] { do_check(); });
}

void LplNode::do_check() {
  next_check_ += params_.check_interval;
  sim_.schedule(timer_.next_tick(next_check_), [this] { do_check(); });
  if (phase_ != LplPhase::Sleep) {
    return;  // busy sending or still receiving
  }
  ++checks_done_;
  set_phase(LplPhase::Check);
  medium_.set_radio(self_, RadioPower::Listening);
  check_start_ = sim_.now();
  rx_timer_ = sim_.schedule_in(params_.check_duration, [this] {
    rx_timer_ = 0;
    check_end();
  });
}

void LplNode::check_end() {
  if (phase_ != LplPhase::Check) {
    return;
  }
  if (medium_.activity_since(check_start_)) {
    set_phase(LplPhase::StayOn);
    rx_timer_ = sim_.schedule_in(params_.listen_timeout, [this] {
      rx_timer_ = 0;
      go_idle();
    });
    return;
  }
  go_idle();
}

void LplNode::go_idle() {
  cancel_rx_timer();
  // An ack ending exactly now is still on air until its tx_end event runs.
  std::optional<SimTime> until = medium_.tx_end_of(self_);
  if (!until) {
    until = responder_.ack_busy_until();
  }
  if (until) {
    rx_timer_ = sim_.schedule(*until, [this] {
      rx_timer_ = 0;
      go_idle();
    });
    return;
  }
  medium_.set_radio(self_, RadioPower::Off);
  set_phase(LplPhase::Sleep);
  if (attempt_pending_) {
    attempt_pending_ = false;
    start_attempt();
  }
}

void LplNode::on_frame(const Frame& frame) {
  if (frame.kind == radio::FrameKind::Ack) {
    if (phase_ == LplPhase::Sending && awaiting_ack_ && frame.dst == self_ &&
        frame.seq == request_.frame.seq) {
      sim_.cancel(gap_timer_);
      awaiting_ack_ = false;
      finish(mac::TxOutcome::Delivered);
    }
    return;
  }
  if (phase_ != LplPhase::Check && phase_ != LplPhase::StayOn) {
    return;
  }
  const auto verdict = responder_.on_frame(frame);
  using V = mac::AckResponder::Verdict;
  if ((verdict == V::Deliver || verdict == V::Broadcast) && hooks_.on_received) {
    hooks_.on_received(frame);
  }
  if (verdict == V::Deliver || verdict == V::Duplicate) {
    // Stay on until our ack has been sent.
    cancel_rx_timer();
    set_phase(LplPhase::StayOn);
    go_idle();
    return;
  }
  go_idle();
}

void LplNode::send(mac::SendRequest request, mac::SendCallback done) {
  if (send_active_) {
    throw radio::ProtocolViolation("lpl_send while another send is in progress");
  }
  if (request.attempts_used >= params_.max_frame_attempts) {
    throw std::invalid_argument("lpl_send: frame has no attempts left");
  }
  send_active_ = true;
  request_ = std::move(request);
  request_.frame.src = self_;
  request_.frame.kind = radio::FrameKind::Strobe;
  done_ = std::move(done);
  attempts_used_ = request_.attempts_used;
  transmissions_ = 0;
  start_attempt();
}

void LplNode::start_attempt() {
  if (phase_ == LplPhase::Check || phase_ == LplPhase::StayOn) {
    attempt_pending_ = true;
    return;
  }
  ++attempts_used_;
  set_phase(LplPhase::Sending);
  medium_.set_radio(self_, RadioPower::Listening);
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "attempt")
      .field("n", attempts_used_)
      .field("seq", static_cast<unsigned>(request_.frame.seq));
  const auto cs = medium_.cca(self_);
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "cca")
      .field("result", cs == radio::ChannelState::Clear ? "clear" : "busy");
  if (cs == radio::ChannelState::Busy) {
    ++caf_total_;
    attempt_failed(mac::TxOutcome::ChannelAccessFailure);
    return;
  }
  gap_timer_ = sim_.schedule_in(turnaround_, [this] {
    train_start_ = sim_.now();
    send_copy();
  });
}

void LplNode::send_copy() {
  ++transmissions_;
  ++strobes_total_;
  medium_.begin_tx(self_, request_.frame, [this] { after_copy(); });
}

void LplNode::after_copy() {
  const SimTime train_end = train_start_ + params_.check_interval;
  if (request_.frame.is_broadcast()) {
    const SimTime next = sim_.now() + params_.strobe_gap;
    if (next <= train_end) {
      gap_timer_ = sim_.schedule(next, [this] { send_copy(); });
    } else {
      finish(mac::TxOutcome::Unconfirmed);
    }
    return;
  }
  awaiting_ack_ = true;
  gap_timer_ = sim_.schedule_in(params_.strobe_gap, [this] { gap_end(); });
}

void LplNode::gap_end() {
  // Energy in the gap may be our ack; let it finish before deciding.
  if (auto until = medium_.channel_busy_until()) {
    gap_timer_ = sim_.schedule(*until, [this] { gap_end(); });
    return;
  }
  awaiting_ack_ = false;
  if (sim_.now() <= train_start_ + params_.check_interval) {
    send_copy();
    return;
  }
  attempt_failed(mac::TxOutcome::NoAck);
}

void LplNode::attempt_failed(mac::TxOutcome why) {
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "attempt_failed")
      .field("n", attempts_used_)
      .field("why", mac::to_string(why));
  if (attempts_used_ >= params_.max_frame_attempts) {
    finish(why);
    return;
  }
  medium_.set_radio(self_, RadioPower::Off);
  set_phase(LplPhase::Sleep);
  const Duration unit =
      params_.retry_backoff_unit != 0 ? params_.retry_backoff_unit : params_.check_interval;
  const auto spread = static_cast<std::uint64_t>(std::min(attempts_used_ + 1, 3));
  const Duration delay = unit + rng_.uniform_below(spread * unit);
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "retry_backoff")
      .field("delay", delay);
  sim_.schedule_in(delay, [this] { start_attempt(); });
}

void LplNode::finish(mac::TxOutcome outcome) {
  send_active_ = false;
  awaiting_ack_ = false;
  medium_.set_radio(self_, RadioPower::Off);
  set_phase(LplPhase::Sleep);
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("mac", "outcome")
      .field("result", mac::to_string(outcome))
      .field("tx", transmissions_)
      .field("attempts", attempts_used_);
  mac::SendCallback done = std::move(done_);
  done_ = nullptr;
  if (done) {
    done(mac::SendResult{outcome, transmissions_, attempts_used_});
  }
}

LplForwarder::LplForwarder(LplNode& node, NodeId self, NodeId next_hop, std::size_t capacity,
                           LeafHooks hooks)
    : node_(node), self_(self), next_hop_(next_hop), capacity_(capacity), hooks_(std::move(hooks)) {
  if (capacity_ == 0) {
    throw std::invalid_argument("forwarder queue capacity must be >= 1");
  }
}

void LplForwarder::enqueue(Packet packet, std::uint8_t mpdu_len) {
  if (queue_.size() >= capacity_) {
    if (hooks_.on_dropped) {
      hooks_.on_dropped(packet, DropReason::QueueFull);
    }
    return;
  }
  packet.seq = next_seq_++;
  queue_.push_back(Entry{packet, mpdu_len});
  if (!node_.sending()) {
    send_next();
  }
}

void LplForwarder::send_next() {
  if (queue_.empty()) {
    return;
  }
  const Entry& head = queue_.front();
  Frame frame;
  frame.kind = radio::FrameKind::Data;
  frame.src = self_;
  frame.dst = next_hop_;
  frame.seq = head.packet.seq;
  frame.mpdu_len = head.mpdu_len;
  frame.packet_id = head.packet.id;
  node_.send(mac::SendRequest{frame, head.packet.attempts_used, std::nullopt},
             [this](const mac::SendResult& r) {
               Packet done = queue_.front().packet;
               done.attempts_used = r.attempts_used;
               queue_.pop_front();
               if (r.outcome == mac::TxOutcome::Delivered ||
                   r.outcome == mac::TxOutcome::Unconfirmed) {
                 if (hooks_.on_sent) {
                   hooks_.on_sent(done);
                 }
               } else if (hooks_.on_dropped) {
                 hooks_.on_dropped(done, r.outcome == mac::TxOutcome::ChannelAccessFailure
                                             ? DropReason::ChannelAccess
                                             : DropReason::AttemptsExhausted);
               }
               send_next();
             });
}

Sink::Sink(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
           Duration turnaround, std::function<void(const Frame&)> on_delivered)
    : responder_(sim, medium, trace, self, turnaround), on_delivered_(std::move(on_delivered)) {
  medium.attach(self, [this](const Frame& f) {
    if (responder_.on_frame(f) == mac::AckResponder::Verdict::Deliver) {
      ++delivered_;
      if (on_delivered_) {
        on_delivered_(f);
      }
    }
  });
  medium.set_radio(self, RadioPower::Listening);
}

}  // namespace scosens::rdc
