#pragma once

// Per-packet ledger and the run-level metrics derived from it.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::harness {

using sim::Duration;
using sim::SimTime;

enum class PacketOutcome : std::uint8_t { AtSink, AtRouter, Dropped, Queued };
std::string_view to_string(PacketOutcome outcome);

/// Where a packet counts as delivered: the sink when the router forwards,
/// the router when the transmission period is disabled.
enum class Endpoint : std::uint8_t { Sink, Router };

struct PacketRecord {
  std::uint64_t uid = 0;
  NodeId origin = 0;
  SimTime t_generated = 0;
  std::optional<SimTime> t_leaf_tx_done;
  std::optional<SimTime> t_router_rx;
  std::optional<SimTime> t_sink_rx;
  bool dropped_at_leaf = false;
  bool dropped_at_router = false;
  PacketOutcome outcome = PacketOutcome::Queued;

  /// Timestamp at which the packet reached `endpoint`, if it did.
  std::optional<SimTime> arrival(Endpoint endpoint) const {
    return endpoint == Endpoint::Sink ? t_sink_rx : t_router_rx;
  }
};

/// Final outcome once the run has ended.
PacketOutcome classify(const PacketRecord& record, Endpoint endpoint);

/// delivered / generated; nullopt when nothing was generated.
std::optional<double> compute_prr(std::span<const PacketRecord> records, Endpoint endpoint);

struct DelaySummary {
  std::size_t count = 0;
  std::optional<double> mean_us;
  /// Midpoint of the two central values for even counts.
  std::optional<double> median_us;
  /// Nearest-rank 95th percentile.
  std::optional<double> p95_us;
};

/// Delay = arrival at endpoint - generation, over delivered packets only.
DelaySummary compute_delays(std::span<const PacketRecord> records, Endpoint endpoint);

struct NodeDuty {
  NodeId node = 0;
  std::string role;
  double duty_cycle = 0.0;
};

struct MetricsReport {
  std::optional<double> prr;
  DelaySummary delay;

  /// Counted packets (generated after the warm-up).
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;

  /// Whole-run accounting, warm-up included.
  std::uint64_t total_generated = 0;
  std::uint64_t at_sink = 0;
  std::uint64_t at_router = 0;
  std::uint64_t dropped = 0;
  std::uint64_t queued = 0;
  /// Packets actually sitting in node queues when the run ended.
  std::uint64_t queued_observed = 0;

  std::uint64_t transmissions = 0;
  std::uint64_t collisions = 0;
  std::uint64_t csma_failures = 0;
  std::uint64_t beacons = 0;
  std::uint64_t cycles = 0;

  std::vector<NodeDuty> duty;
  double leaf_duty_mean = 0.0;
  double router_duty = 0.0;
  double sink_duty = 0.0;

  /// generated = at_sink + at_router + dropped + queued, where queued must
  /// match what the node queues really held.
  bool accounting_ok() const {
    return total_generated == at_sink + at_router + dropped + queued && queued == queued_observed;
  }
};

/// Flat key=value summary of one run.
void write_summary(std::ostream& out, const MetricsReport& report);

}  // namespace scosens::harness
