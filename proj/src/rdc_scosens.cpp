#include "scosens/rdc_scosens.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scosens::rdc {

using radio::RadioPower;

void ScosensParams::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("scosens: alpha must lie in [0, 1]");
  }
  if (subframe == 0) {
    throw std::invalid_argument("scosens: subframe must be > 0");
  }
  if (wp_min > wp_max || wp_max > subframe) {
    throw std::invalid_argument("scosens: need wp_min <= wp_max <= subframe");
  }
  if (wp_initial > subframe) {
    throw std::invalid_argument("scosens: wp_initial must not exceed the subframe");
  }
}

WpState WpState::initial(const ScosensParams& params) {
  return from_us(params.wp_initial, params.wp_initial, 0);
}

WpState WpState::from_us(Duration avg_wp, Duration last_actual_wp, std::uint64_t cycle_index) {
  return WpState{avg_wp * kWpAvgScale, last_actual_wp, cycle_index};
}

WpSchedule next_wp(const WpState& state, const ScosensParams& params) {
  const double blend =
      params.alpha * static_cast<double>(state.avg_wp_scaled) +
      (1.0 - params.alpha) * static_cast<double>(state.last_actual_wp * kWpAvgScale);
  const auto scaled = static_cast<std::uint64_t>(std::floor(blend + 0.5));
  const Duration avg = (scaled + kWpAvgScale / 2) / kWpAvgScale;
  return WpSchedule{scaled, avg, std::max(params.wp_min, std::min(avg, params.wp_max))};
}

WpState advance_wp(const WpState& state, const WpSchedule& scheduled, Duration measured_demand) {
  return WpState{scheduled.avg_wp_scaled, measured_demand, state.cycle_index + 1};
}

Duration sp_for(Duration wp, const ScosensParams& params) {
  if (wp > params.subframe) {
    throw std::logic_error("sp_for: WP longer than the subframe");
  }
  return params.subframe - wp;
}

Duration measure_wp_demand(const RouterCycleState& cycle, const ScosensParams& params) {
  if (!cycle.wp_demand_end) {
    return params.wp_min;
  }
  return *cycle.wp_demand_end - cycle.wp_start;
}

std::string_view to_string(RouterPhase phase) {
  switch (phase) {
    case RouterPhase::Idle:
      return "idle";
    case RouterPhase::Beacon:
      return "beacon";
    case RouterPhase::SP:
      return "sp";
    case RouterPhase::WP:
      return "wp";
    case RouterPhase::TP:
      return "tp";
  }
  return "?";
}

std::string_view to_string(WindowCheck check) {
  return check == WindowCheck::BeforeSend ? "send" : "transmission";
}

std::string_view to_string(LeafPhase phase) {
  switch (phase) {
    case LeafPhase::Sleep:
      return "sleep";
    case LeafPhase::AwaitBeacon:
      return "await_beacon";
    case LeafPhase::SleepUntilWp:
      return "sleep_until_wp";
    case LeafPhase::Contend:
      return "contend";
  }
  return "?";
}

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::QueueFull:
      return "queue_full";
    case DropReason::AttemptsExhausted:
      return "attempts_exhausted";
    case DropReason::ChannelAccess:
      return "channel_access";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Router

ScosensRouter::ScosensRouter(sim::Simulator& sim, radio::Medium& medium, Trace& trace,
                             NodeId self, NodeId sink, ScosensParams params,
                             mac::CsmaParams csma, mac::BackoffDraw draw, sim::TimerGrid timer,
                             RouterHooks hooks)
    : sim_(sim),
      medium_(medium),
      trace_(trace),
      self_(self),
      sink_(sink),
      params_(params),
      timer_(timer),
      hooks_(std::move(hooks)),
      csma_(sim, medium, trace, self, csma, std::move(draw)),
      responder_(sim, medium, trace, self, csma.turnaround),
      wp_state_(WpState::initial(params)) {
  params_.validate();
  medium_.attach(self_, [this](const Frame& f) { on_frame(f); });
}

void ScosensRouter::start(SimTime at) {
  sim_.schedule(at, [this] { start_cycle(); });
}

void ScosensRouter::set_phase(RouterPhase phase) {
  cycle_.phase = phase;
  trace_.record(sim_.now(), self_, TraceKind::State).field("phase", to_string(phase));
}

void ScosensRouter::start_cycle() {
  schedule_ = next_wp(wp_state_, params_);
  current_ = CycleLog{};
  current_.index = wp_state_.cycle_index;
  current_.cycle_start = sim_.now();
  current_.wp = schedule_.wp;
  current_.avg_wp = schedule_.avg_wp;
  current_.sp = sp_for(schedule_.wp, params_);
  set_phase(RouterPhase::Beacon);
  medium_.set_radio(self_, RadioPower::Listening);
  try_beacon();
}

void ScosensRouter::try_beacon() {
  // One CCA, no backoff escalation: a busy channel only delays the beacon.
  if (medium_.power(self_) != RadioPower::Listening ||
      medium_.cca(self_) == radio::ChannelState::Busy) {
    sim_.schedule_in(csma_.params().backoff_period, [this] { try_beacon(); });
    return;
  }
  sim_.schedule_in(csma_.params().turnaround, [this] { send_beacon(); });
}

void ScosensRouter::send_beacon() {
  if (medium_.power(self_) != RadioPower::Listening) {
    try_beacon();
    return;
  }
  const radio::BeaconPayload payload{static_cast<std::uint32_t>(current_.sp),
                                     static_cast<std::uint32_t>(current_.wp)};
  current_.beacon_start = sim_.now();
  trace_.record(sim_.now(), self_, TraceKind::Beacon)
      .field("cycle", current_.index)
      .field("sp_us", payload.sp_us)
      .field("wp_us", payload.wp_us);
  medium_.begin_tx(self_, radio::make_beacon_frame(self_, beacon_seq_++, payload),
                   [this] { on_beacon_end(); });
  ++beacons_sent_;
}

void ScosensRouter::on_beacon_end() {
  current_.beacon_end = sim_.now();
  set_phase(RouterPhase::SP);
  const SimTime wake = timer_.next_tick(sim_.now() + current_.sp);
  if (wake > sim_.now()) {
    medium_.set_radio(self_, RadioPower::Off);
  }
  sim_.schedule(wake, [this] { begin_wp(); });
}

void ScosensRouter::begin_wp() {
  medium_.set_radio(self_, RadioPower::Listening);
  cycle_.wp_start = sim_.now();
  cycle_.wp_demand_end.reset();
  current_.wp_start = sim_.now();
  set_phase(RouterPhase::WP);
  sim_.schedule(timer_.next_tick(sim_.now() + current_.wp), [this] { end_wp(); });
}

std::optional<SimTime> ScosensRouter::ack_busy_until() const {
  // An ack that is on air or already committed must finish first.
  std::optional<SimTime> until = medium_.tx_end_of(self_);
  if (!until) {
    until = responder_.ack_busy_until();
  }
  // tx_end_of may equal now: the frame's end event has not run yet.
  if (until && (*until > sim_.now() || medium_.is_transmitting(self_))) {
    return until;
  }
  return std::nullopt;
}

void ScosensRouter::end_wp() {
  if (const auto until = ack_busy_until()) {
    sim_.schedule(*until, [this] { end_wp(); });
    return;
  }
  current_.wp_end = sim_.now();
  const Duration demand = measure_wp_demand(cycle_, params_);
  current_.demand = demand;
  wp_state_ = advance_wp(wp_state_, schedule_, demand);
  trace_.record(sim_.now(), self_, TraceKind::State)
      .field("wp_end", current_.index)
      .field("demand", demand)
      .field("queued", cycle_.queue.size());

  if (params_.tp_enabled && !cycle_.queue.empty()) {
    set_phase(RouterPhase::TP);
    forward_next();
    return;
  }
  if (!params_.tp_enabled) {
    for (const auto& p : cycle_.queue) {
      if (hooks_.on_terminal) {
        hooks_.on_terminal(p);
      }
    }
    cycle_.queue.clear();
  }
  current_.tp_end = sim_.now();
  cycles_.push_back(current_);
  start_cycle();
}

void ScosensRouter::forward_next() {
  if (cycle_.queue.empty()) {
    current_.tp_end = sim_.now();
    cycles_.push_back(current_);
    start_cycle();
    return;
  }
  // A leaf frame that spilled past the WP may still be getting its ack.
  if (const auto until = ack_busy_until()) {
    sim_.schedule(*until, [this] { forward_next(); });
    return;
  }
  const QueuedPacket& head = cycle_.queue.front();
  Frame frame;
  frame.kind = radio::FrameKind::Data;
  frame.dst = sink_;
  frame.seq = data_seq_++;
  frame.mpdu_len = head.mpdu_len;
  frame.packet_id = head.packet_id;
  csma_.send(mac::SendRequest{frame, 0, std::nullopt}, [this](const mac::SendResult& r) {
    const QueuedPacket done = cycle_.queue.front();
    cycle_.queue.pop_front();
    ++current_.forwarded;
    if (hooks_.on_forwarded) {
      hooks_.on_forwarded(done, r.outcome);
    }
    forward_next();
  });
}

void ScosensRouter::on_frame(const Frame& frame) {
  if (frame.kind == radio::FrameKind::Ack) {
    csma_.on_ack(frame);
    return;
  }
  const auto verdict = responder_.on_frame(frame);
  if (verdict != mac::AckResponder::Verdict::Deliver &&
      verdict != mac::AckResponder::Verdict::Duplicate) {
    return;
  }
  if (cycle_.phase == RouterPhase::WP) {
    cycle_.wp_demand_end = sim_.now();
  }
  if (verdict == mac::AckResponder::Verdict::Deliver) {
    QueuedPacket p{frame.packet_id, frame.src, frame.mpdu_len};
    cycle_.queue.push_back(p);
    ++current_.received;
    if (hooks_.on_received) {
      hooks_.on_received(p);
    }
  }
}

// ---------------------------------------------------------------------------
// Leaf

ScosensLeaf::ScosensLeaf(sim::Simulator& sim, radio::Medium& medium, Trace& trace, NodeId self,
                         NodeId router, ScosensParams params, mac::CsmaParams csma,
                         mac::BackoffDraw draw, sim::TimerGrid timer, std::size_t payload_len,
                         std::size_t queue_capacity, LeafHooks hooks)
    : sim_(sim),
      medium_(medium),
      trace_(trace),
      self_(self),
      router_(router),
      params_(params),
      timer_(timer),
      payload_len_(payload_len),
      queue_capacity_(queue_capacity),
      hooks_(std::move(hooks)),
      csma_(sim, medium, trace, self, csma, std::move(draw)) {
  params_.validate();
  if (queue_capacity_ == 0) {
    throw std::invalid_argument("leaf queue capacity must be >= 1");
  }
  medium_.attach(self_, [this](const Frame& f) { on_frame(f); });
}

void ScosensLeaf::set_phase(LeafPhase phase) {
  phase_ = phase;
  trace_.record(sim_.now(), self_, TraceKind::State).field("phase", to_string(phase));
}

void ScosensLeaf::on_packet_arrival(Packet packet) {
  if (queue_.size() >= queue_capacity_) {
    if (hooks_.on_dropped) {
      hooks_.on_dropped(packet, DropReason::QueueFull);
    }
    return;
  }
  packet.seq = next_seq_++;
  queue_.push_back(packet);
  if (phase_ == LeafPhase::Sleep) {
    medium_.set_radio(self_, RadioPower::Listening);
    set_phase(LeafPhase::AwaitBeacon);
  }
}

void ScosensLeaf::on_frame(const Frame& frame) {
  switch (frame.kind) {
    case radio::FrameKind::Beacon:
      if (frame.src != router_ || !frame.beacon) {
        break;
      }
      if (phase_ == LeafPhase::AwaitBeacon) {
        on_beacon(*frame.beacon);
      } else if (phase_ == LeafPhase::Contend) {
        // A new cycle has begun, so the WP this send aimed at is over.
        const SimTime start = sim_.now() + frame.beacon->sp_us;
        next_window_ = WpWindow{start, start + frame.beacon->wp_us};
        trace_.record(sim_.now(), self_, TraceKind::State).field("leaf", "late_beacon");
        csma_.cut_off();
      }
      break;
    case radio::FrameKind::Ack:
      csma_.on_ack(frame);
      break;
    default:
      break;
  }
}

void ScosensLeaf::on_beacon(const radio::BeaconPayload& payload) {
  const SimTime start = sim_.now() + payload.sp_us;
  adopt_window(WpWindow{start, start + payload.wp_us});
}

void ScosensLeaf::adopt_window(WpWindow window) {
  window_ = window;
  sent_this_window_ = 0;
  set_phase(LeafPhase::SleepUntilWp);
  const SimTime wake = std::max(timer_.next_tick(window.start), sim_.now());
  if (wake > sim_.now()) {
    medium_.set_radio(self_, RadioPower::Off);
  }
  sim_.schedule(wake, [this] { contend(); });
}

void ScosensLeaf::contend() {
  medium_.set_radio(self_, RadioPower::Listening);
  wakeups_.push_back(sim_.now());
  set_phase(LeafPhase::Contend);
  send_next();
}

void ScosensLeaf::send_next() {
  if (queue_.empty()) {
    medium_.set_radio(self_, RadioPower::Off);
    set_phase(LeafPhase::Sleep);
    return;
  }
  if (params_.leaf_burst_cap != 0 && sent_this_window_ >= params_.leaf_burst_cap) {
    await_next_beacon();
    return;
  }
  const Packet& head = queue_.front();
  Frame frame = radio::make_data_frame(self_, router_, head.seq, payload_len_, head.id);
  const SimTime exchange_end =
      sim_.now() + radio::frame_airtime(frame.mpdu_len) + csma_.params().ack_wait;
  if (exchange_end > window_->end) {
    trace_.record(sim_.now(), self_, TraceKind::State).field("leaf", "window_full");
    await_next_beacon();
    return;
  }
  std::optional<SimTime> deadline;
  if (params_.window_check == WindowCheck::BeforeEachTx) {
    deadline = window_->end;
  }
  mac::SendRequest req{frame, head.attempts_used, deadline};
  csma_.send(std::move(req), [this](const mac::SendResult& r) { on_sent(r); });
}

void ScosensLeaf::on_sent(const mac::SendResult& result) {
  Packet& head = queue_.front();
  head.attempts_used = result.attempts_used;
  switch (result.outcome) {
    case mac::TxOutcome::Deferred:
      break;
    case mac::TxOutcome::Delivered:
      ++sent_this_window_;
      if (hooks_.on_sent) {
        hooks_.on_sent(head);
      }
      queue_.pop_front();
      break;
    case mac::TxOutcome::NoAck:
    case mac::TxOutcome::ChannelAccessFailure:
    case mac::TxOutcome::Unconfirmed:
      if (hooks_.on_dropped) {
        hooks_.on_dropped(head, result.outcome == mac::TxOutcome::ChannelAccessFailure
                                    ? DropReason::ChannelAccess
                                    : DropReason::AttemptsExhausted);
      }
      queue_.pop_front();
      break;
  }
  if (next_window_) {
    const WpWindow next = *next_window_;
    next_window_.reset();
    if (queue_.empty()) {
      send_next();  // goes to sleep
    } else {
      adopt_window(next);
    }
    return;
  }
  if (result.outcome == mac::TxOutcome::Deferred) {
    await_next_beacon();
    return;
  }
  send_next();
}

void ScosensLeaf::await_next_beacon() {
  // Radio stays on: the next beacon follows this WP (and the router's TP).
  set_phase(LeafPhase::AwaitBeacon);
}

}  // namespace scosens::rdc
