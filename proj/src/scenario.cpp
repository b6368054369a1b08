#include "scosens/scenario.hpp"

#include <cmath>
#include <memory>
#include <unordered_set>

#include "scosens/radio_medium.hpp"
#include "scosens/rdc_lpl.hpp"

namespace scosens::harness {

namespace {

using rdc::Packet;

sim::TimerGrid timer_for(const ScenarioConfig& c, sim::RandomSource& rng) {
  if (c.quantization <= 1) {
    return sim::TimerGrid{1, 0};
  }
  return sim::TimerGrid{c.quantization, rng.uniform_below(c.quantization)};
}

/// Shared state of one run: the packet ledger plus the per-leaf traffic
/// generators feeding it.
class Run {
 public:
  explicit Run(const ScenarioConfig& config, std::ostream* trace_out)
      : config_(config),
        layout_(NodeLayout::for_leaves(config.n_leaves)),
        trace_(trace_out != nullptr ? Trace(*trace_out) : Trace()),
        medium_(sim_, trace_) {}

  ScenarioResult execute() {
    if (config_.protocol == Protocol::Scosens) {
      build_scosens();
    } else {
      build_lpl();
    }
    start_traffic();
    sim_.run_until(config_.duration);
    return collect();
  }

 private:
  PacketRecord& record(std::uint64_t uid) { return records_.at(uid - 1); }

  rdc::LeafHooks leaf_hooks() {
    return rdc::LeafHooks{
        [this](const Packet& p) { record(p.id).t_leaf_tx_done = sim_.now(); },
        [this](const Packet& p, rdc::DropReason) { record(p.id).dropped_at_leaf = true; }};
  }

  void mark_router_rx(std::uint64_t uid) {
    auto& r = record(uid);
    if (!r.t_router_rx) {
      r.t_router_rx = sim_.now();
    }
  }

  void mark_sink_rx(const radio::Frame& f) {
    auto& r = record(f.packet_id);
    if (!r.t_sink_rx) {
      r.t_sink_rx = sim_.now();
    }
  }

  void build_scosens() {
    endpoint_ = config_.scosens.tp_enabled ? Endpoint::Sink : Endpoint::Router;
    const auto& c = config_;
    sink_ = std::make_unique<rdc::Sink>(sim_, medium_, trace_, layout_.sink, c.csma.turnaround,
                                        [this](const radio::Frame& f) { mark_sink_rx(f); });

    rngs_.push_back(std::make_unique<sim::RandomSource>(c.seed, layout_.router, kStreamBackoff));
    auto& router_backoff = *rngs_.back();
    sim::RandomSource router_timer_rng(c.seed, layout_.router, kStreamTimer);
    rdc::RouterHooks hooks;
    hooks.on_received = [this](const rdc::QueuedPacket& p) { mark_router_rx(p.packet_id); };
    hooks.on_forwarded = [this](const rdc::QueuedPacket& p, mac::TxOutcome outcome) {
      if (outcome != mac::TxOutcome::Delivered) {
        record(p.packet_id).dropped_at_router = true;
      }
    };
    router_ = std::make_unique<rdc::ScosensRouter>(
        sim_, medium_, trace_, layout_.router, layout_.sink, c.scosens, c.csma,
        mac::backoff_from(router_backoff), timer_for(c, router_timer_rng), std::move(hooks));

    for (int i = 0; i < c.n_leaves; ++i) {
      const NodeId id = layout_.leaf(i);
      rngs_.push_back(std::make_unique<sim::RandomSource>(c.seed, id, kStreamBackoff));
      auto& backoff = *rngs_.back();
      sim::RandomSource timer_rng(c.seed, id, kStreamTimer);
      leaves_.push_back(std::make_unique<rdc::ScosensLeaf>(
          sim_, medium_, trace_, id, layout_.router, c.scosens, c.csma,
          mac::backoff_from(backoff), timer_for(c, timer_rng), c.payload_len, c.queue_capacity,
          leaf_hooks()));
      auto* leaf = leaves_.back().get();
      inject_.push_back([leaf](Packet p) { leaf->on_packet_arrival(p); });
    }
    router_->start(0);
  }

  void build_lpl() {
    endpoint_ = Endpoint::Sink;
    const auto& c = config_;
    const auto mpdu = static_cast<std::uint8_t>(c.payload_len + radio::kDataHeaderLen);
    sink_ = std::make_unique<rdc::Sink>(sim_, medium_, trace_, layout_.sink, c.csma.turnaround,
                                        [this](const radio::Frame& f) { mark_sink_rx(f); });

    auto make_node = [&](NodeId id, rdc::LplHooks hooks) -> rdc::LplNode& {
      rngs_.push_back(std::make_unique<sim::RandomSource>(c.seed, id, kStreamBackoff));
      auto& backoff = *rngs_.back();
      sim::RandomSource timer_rng(c.seed, id, kStreamTimer);
      const sim::TimerGrid grid = timer_for(c, timer_rng);
      lpl_nodes_.push_back(std::make_unique<rdc::LplNode>(sim_, medium_, trace_, id, c.lpl,
                                                          c.csma.turnaround, backoff, grid,
                                                          std::move(hooks)));
      lpl_nodes_.back()->start(timer_rng.uniform_below(c.lpl.check_interval));
      return *lpl_nodes_.back();
    };

    // The router forwards every new reception to the sink.
    rdc::LplHooks router_hooks;
    router_hooks.on_received = [this, mpdu](const radio::Frame& f) {
      mark_router_rx(f.packet_id);
      const auto& r = record(f.packet_id);
      router_forwarder_->enqueue(Packet{f.packet_id, r.origin, r.t_generated, 0, 0}, mpdu);
    };
    auto& router_node = make_node(layout_.router, std::move(router_hooks));
    rdc::LeafHooks fwd_hooks;
    fwd_hooks.on_dropped = [this](const Packet& p, rdc::DropReason) {
      record(p.id).dropped_at_router = true;
    };
    router_forwarder_ = std::make_unique<rdc::LplForwarder>(
        router_node, layout_.router, layout_.sink, c.router_queue_capacity, std::move(fwd_hooks));

    for (int i = 0; i < c.n_leaves; ++i) {
      const NodeId id = layout_.leaf(i);
      auto& node = make_node(id, {});
      forwarders_.push_back(std::make_unique<rdc::LplForwarder>(node, id, layout_.router,
                                                                c.queue_capacity, leaf_hooks()));
      auto* fwd = forwarders_.back().get();
      inject_.push_back([fwd, mpdu](Packet p) { fwd->enqueue(p, mpdu); });
    }
  }

  void start_traffic() {
    for (int i = 0; i < config_.n_leaves; ++i) {
      traffic_rngs_.push_back(
          std::make_unique<sim::RandomSource>(config_.seed, layout_.leaf(i), kStreamTraffic));
      const SimTime first = config_.traffic == TrafficModel::Periodic
                                ? traffic_rngs_.back()->uniform_below(config_.pai)
                                : next_gap(i);
      schedule_arrival(i, first);
    }
  }

  Duration next_gap(int leaf) {
    if (config_.traffic == TrafficModel::Periodic) {
      return config_.pai;
    }
    const double u = traffic_rngs_[static_cast<std::size_t>(leaf)]->uniform_unit();
    const double gap = -std::log1p(-u) * static_cast<double>(config_.pai);
    return std::max<Duration>(1, static_cast<Duration>(std::llround(gap)));
  }

  void schedule_arrival(int leaf, SimTime at) {
    if (at >= config_.duration) {
      return;
    }
    sim_.schedule(at, [this, leaf] {
      const std::uint64_t uid = records_.size() + 1;
      PacketRecord r;
      r.uid = uid;
      r.origin = layout_.leaf(leaf);
      r.t_generated = sim_.now();
      records_.push_back(r);
      trace_.record(sim_.now(), r.origin, TraceKind::State)
          .field("app", "generate")
          .field("packet", uid);
      inject_[static_cast<std::size_t>(leaf)](Packet{uid, r.origin, r.t_generated, 0, 0});
      schedule_arrival(leaf, sim_.now() + next_gap(leaf));
    });
  }

  // Distinct packets held in any queue that have not reached the endpoint.
  // A packet can sit in two queues at once when an ack was lost.
  std::uint64_t observed_in_queues() const {
    std::unordered_set<std::uint64_t> ids;
    for (const auto& leaf : leaves_) {
      for (const auto& p : leaf->queue()) {
        ids.insert(p.id);
      }
    }
    for (const auto& fwd : forwarders_) {
      for (const auto& e : fwd->queue()) {
        ids.insert(e.packet.id);
      }
    }
    if (router_forwarder_) {
      for (const auto& e : router_forwarder_->queue()) {
        ids.insert(e.packet.id);
      }
    }
    if (router_) {
      for (const auto& p : router_->queue()) {
        ids.insert(p.packet_id);
      }
    }
    std::uint64_t count = 0;
    for (auto id : ids) {
      const auto& r = records_.at(id - 1);
      // A leaf may still be retrying a copy the router already gave up on.
      if (!r.arrival(endpoint_) && !r.dropped_at_router) {
        ++count;
      }
    }
    return count;
  }

  ScenarioResult collect() {
    ScenarioResult out;
    out.endpoint = endpoint_;
    MetricsReport& m = out.report;

    const SimTime warmup = config_.warmup();
    std::vector<PacketRecord> counted;
    for (auto& r : records_) {
      r.outcome = classify(r, endpoint_);
      switch (r.outcome) {
        case PacketOutcome::AtSink:
          ++m.at_sink;
          break;
        case PacketOutcome::AtRouter:
          ++m.at_router;
          break;
        case PacketOutcome::Dropped:
          ++m.dropped;
          break;
        case PacketOutcome::Queued:
          ++m.queued;
          break;
      }
      if (r.t_generated >= warmup) {
        counted.push_back(r);
      }
    }
    m.total_generated = records_.size();
    m.queued_observed = observed_in_queues();
    m.generated = counted.size();
    m.prr = compute_prr(counted, endpoint_);
    m.delay = compute_delays(counted, endpoint_);
    m.delivered = m.delay.count;

    m.transmissions = medium_.transmissions();
    m.collisions = medium_.collided_transmissions();
    const double span = static_cast<double>(config_.duration);
    auto duty = [&](NodeId id, const char* role) {
      const double d = static_cast<double>(medium_.on_time(id)) / span;
      m.duty.push_back(NodeDuty{id, role, d});
      return d;
    };
    m.router_duty = duty(layout_.router, "router");
    double leaf_sum = 0;
    for (int i = 0; i < config_.n_leaves; ++i) {
      leaf_sum += duty(layout_.leaf(i), "leaf");
    }
    m.leaf_duty_mean = leaf_sum / config_.n_leaves;
    m.sink_duty = duty(layout_.sink, "sink");

    if (router_) {
      m.csma_failures = router_->mac().channel_access_failures();
      for (const auto& leaf : leaves_) {
        m.csma_failures += leaf->mac().channel_access_failures();
      }
      m.beacons = router_->beacons_sent();
      m.cycles = router_->cycles().size();
      out.cycles = router_->cycles();
    }
    for (const auto& node : lpl_nodes_) {
      m.csma_failures += node->channel_access_failures();
    }
    out.records = std::move(records_);
    return out;
  }

  const ScenarioConfig& config_;
  NodeLayout layout_;
  sim::Simulator sim_;
  Trace trace_;
  radio::Medium medium_;
  Endpoint endpoint_ = Endpoint::Sink;

  std::vector<PacketRecord> records_;
  std::vector<std::function<void(Packet)>> inject_;
  std::vector<std::unique_ptr<sim::RandomSource>> rngs_;
  std::vector<std::unique_ptr<sim::RandomSource>> traffic_rngs_;

  std::unique_ptr<rdc::Sink> sink_;
  std::unique_ptr<rdc::ScosensRouter> router_;
  std::vector<std::unique_ptr<rdc::ScosensLeaf>> leaves_;
  std::vector<std::unique_ptr<rdc::LplNode>> lpl_nodes_;
  std::vector<std::unique_ptr<rdc::LplForwarder>> forwarders_;
  std::unique_ptr<rdc::LplForwarder> router_forwarder_;
};

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, std::ostream* trace) {
  config.validate();
  Run run(config, trace);
  return run.execute();
}

}  // namespace scosens::harness
