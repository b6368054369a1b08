#pragma once

// Star-topology scenario: one router, n leaves and an always-listening sink
// on a single channel. Node ids are fixed: router 1, leaves 2..n+1, sink n+2.

#include <iosfwd>
#include <vector>

#include "scosens/config.hpp"
#include "scosens/metrics.hpp"
#include "scosens/rdc_scosens.hpp"

namespace scosens::harness {

struct NodeLayout {
  NodeId router = 1;
  NodeId first_leaf = 2;
  NodeId sink = 0;

  static NodeLayout for_leaves(int n_leaves) {
    return NodeLayout{1, 2, static_cast<NodeId>(n_leaves + 2)};
  }
  NodeId leaf(int index) const { return static_cast<NodeId>(first_leaf + index); }
};

/// RandomSource stream tags, per node.
inline constexpr std::uint64_t kStreamBackoff = 0;
inline constexpr std::uint64_t kStreamTraffic = 1;
inline constexpr std::uint64_t kStreamTimer = 2;

struct ScenarioResult {
  MetricsReport report;
  /// Indexed by packet uid - 1, in generation order.
  std::vector<PacketRecord> records;
  /// Completed router cycles (S-CoSenS only).
  std::vector<rdc::CycleLog> cycles;
  Endpoint endpoint = Endpoint::Sink;
};

/// Validates the config (ConfigError), then simulates it. When `trace` is
/// non-null every trace record is written there. Handler failures surface
/// as sim::SimulationFault.
ScenarioResult run_scenario(const ScenarioConfig& config, std::ostream* trace = nullptr);

}  // namespace scosens::harness
