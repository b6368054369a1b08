#include <memory>
#include <optional>

#include "doctest.h"
#include "scosens/rdc_lpl.hpp"
#include "scosens/rdc_scosens.hpp"
#include "support.hpp"

using namespace scosens;
using namespace scosens::rdc;
using radio::RadioPower;
using scosens::testing::Bench;
using scosens::testing::ScriptedDraw;

TEST_CASE("next_wp: spec examples") {
  ScosensParams p;
  p.wp_min = 10'000;
  p.wp_max = 100'000;
  p.subframe = 100'000;

  p.alpha = 1.0;
  CHECK(next_wp(WpState::from_us(40'000, 90'000, 3), p).avg_wp == 40'000);

  p.alpha = 0.0;
  CHECK(next_wp(WpState::from_us(40'000, 70'000, 3), p).avg_wp == 70'000);

  p.alpha = 0.5;
  const auto s = next_wp(WpState::from_us(40'000, 80'000, 3), p);
  CHECK(s.avg_wp == 60'000);
  CHECK(s.wp == 60'000);

  const auto low = next_wp(WpState::from_us(4'000, 4'000, 3), p);
  CHECK(low.avg_wp == 4'000);
  CHECK(low.wp == 10'000);
}

TEST_CASE("next_wp rounds the blend half up") {
  ScosensParams p;
  p.alpha = 0.5;
  // 0.5 * 1 + 0.5 * 2 = 1.5 -> 2
  CHECK(next_wp(WpState::from_us(1, 2, 0), p).avg_wp == 2);
  // 0.5 * 1 + 0.5 * 0 = 0.5 -> 1
  CHECK(next_wp(WpState::from_us(1, 0, 0), p).avg_wp == 1);
}

TEST_CASE("the average keeps sub-microsecond precision") {
  ScosensParams p;
  p.alpha = 0.9;
  // d + 5 us: 0.9 * 5 = 4.5 would round back up to 5 with whole-us state.
  const auto s = next_wp(WpState::from_us(30'005, 30'000), p);
  CHECK(s.avg_wp_scaled == 30'004 * kWpAvgScale + kWpAvgScale / 2);
  CHECK(s.avg_wp == 30'005);
  const auto s2 = next_wp(advance_wp(WpState::from_us(30'005, 30'000), s, 30'000), p);
  CHECK(s2.avg_wp == 30'004);
}

TEST_CASE("advance_wp feeds the measured demand as the previous actual") {
  ScosensParams p;
  const auto s0 = WpState::initial(p);
  CHECK(s0.avg_wp() == p.wp_initial);
  CHECK(s0.last_actual_wp == p.wp_initial);
  const auto sched = next_wp(s0, p);
  const auto s1 = advance_wp(s0, sched, 12'345);
  CHECK(s1.avg_wp_scaled == sched.avg_wp_scaled);
  CHECK(s1.last_actual_wp == 12'345);
  CHECK(s1.cycle_index == 1);
}

TEST_CASE("sp_for") {
  ScosensParams p;
  CHECK(sp_for(80'000, p) == 20'000);
  CHECK(sp_for(100'000, p) == 0);
  CHECK(sp_for(60'000, p) == 40'000);
  CHECK_THROWS_AS(sp_for(100'001, p), std::logic_error);
}

TEST_CASE("measure_wp_demand") {
  ScosensParams p;
  RouterCycleState c;
  c.wp_start = 1'000'000;
  CHECK(measure_wp_demand(c, p) == p.wp_min);
  c.wp_demand_end = 1'030'000;
  CHECK(measure_wp_demand(c, p) == 30'000);
  c.wp_demand_end = 1'080'000;
  CHECK(measure_wp_demand(c, p) == 80'000);
}

TEST_CASE("params validation") {
  ScosensParams p;
  p.alpha = 1.5;
  CHECK_THROWS(p.validate());
  p = {};
  p.wp_max = 200'000;
  CHECK_THROWS(p.validate());
  p = {};
  p.wp_min = 95'000;
  CHECK_THROWS(p.validate());
}

namespace {

// Router 1, sink 3 and optional leaves 2, 4, ... with exact timers.
struct Star {
  Bench b;
  ScosensParams params;
  mac::CsmaParams csma;
  ScriptedDraw router_draw;
  std::vector<std::unique_ptr<ScriptedDraw>> leaf_draws;
  std::unique_ptr<Sink> sink;
  std::unique_ptr<ScosensRouter> router;
  std::vector<std::unique_ptr<ScosensLeaf>> leaves;
  std::vector<std::uint64_t> at_sink;
  std::vector<std::uint64_t> terminal;
  std::vector<std::pair<std::uint64_t, DropReason>> dropped;

  explicit Star(ScosensParams p = {}) : params(p) {}

  void build(int n_leaves, std::size_t capacity = 8) {
    sink = std::make_unique<Sink>(b.sim, b.medium, b.trace, 3, csma.turnaround,
                                  [this](const Frame& f) { at_sink.push_back(f.packet_id); });
    RouterHooks hooks;
    hooks.on_terminal = [this](const QueuedPacket& q) { terminal.push_back(q.packet_id); };
    router = std::make_unique<ScosensRouter>(b.sim, b.medium, b.trace, 1, 3, params, csma,
                                             router_draw.fn(), sim::TimerGrid{}, hooks);
    for (int i = 0; i < n_leaves; ++i) {
      leaf_draws.push_back(std::make_unique<ScriptedDraw>());
      const NodeId id = i == 0 ? 2 : static_cast<NodeId>(3 + i);
      LeafHooks lh;
      lh.on_dropped = [this](const Packet& p, DropReason r) { dropped.emplace_back(p.id, r); };
      leaves.push_back(std::make_unique<ScosensLeaf>(b.sim, b.medium, b.trace, id, 1, params,
                                                     csma, leaf_draws.back()->fn(),
                                                     sim::TimerGrid{}, 30, capacity, lh));
    }
    router->start(0);
  }

  void arrive(std::size_t leaf, sim::SimTime at, std::uint64_t id) {
    b.sim.schedule(at, [this, leaf, at, id] {
      leaves[leaf]->on_packet_arrival(Packet{id, 0, at, 0, 0});
    });
  }
};

}  // namespace

TEST_CASE("idle router cycle timeline") {
  Star s;
  s.build(0);
  s.b.sim.run_until(250'000);
  const auto& cycles = s.router->cycles();
  REQUIRE(cycles.size() >= 2);
  // CCA at 0, turnaround 192, 13-byte beacon = (6 + 13) * 32 = 608 us.
  CHECK(cycles[0].beacon_start == 192);
  CHECK(cycles[0].beacon_end == 800);
  CHECK(cycles[0].wp == 80'000);
  CHECK(cycles[0].sp == 20'000);
  CHECK(cycles[0].wp_start == 20'800);
  CHECK(cycles[0].wp_end == 100'800);
  CHECK(cycles[0].demand == 10'000);
  CHECK(cycles[1].cycle_start == 100'800);
  CHECK(cycles[1].beacon_start == 100'992);
  // 0.9 * 80000 + 0.1 * 10000
  CHECK(cycles[1].wp == 73'000);
  CHECK(cycles[1].sp + cycles[1].wp == 100'000);
  // Radio: on during beacon and WP only.
  CHECK(s.b.medium.on_time(1) >= 800 + 80'000);
}

TEST_CASE("one leaf, one packet: beacon, SP sleep, WP send, TP forward") {
  Star s;
  s.build(1);
  s.leaf_draws[0]->values = {3};
  s.router_draw.values = {0};
  s.arrive(0, 50, 77);
  s.b.sim.run_until(250'000);

  auto& leaf = *s.leaves[0];
  REQUIRE(leaf.wp_wakeups().size() == 1);
  CHECK(leaf.wp_wakeups()[0] == 20'800);
  REQUIRE(leaf.window());
  CHECK(leaf.window()->start == 20'800);
  CHECK(leaf.window()->end == 100'800);
  CHECK(leaf.phase() == LeafPhase::Sleep);
  CHECK(s.b.medium.power(2) == RadioPower::Off);

  // Leaf: CCA at 20800 + 960, data 21952..23456, ack 23648..24000.
  // On-air time: 50..800 waiting for the beacon, 20800..24000 in the WP.
  CHECK(s.b.medium.on_time(2) == 750 + 3'200);

  const auto& c0 = s.router->cycles().at(0);
  CHECK(c0.received == 1);
  CHECK(c0.demand == 23'456 - 20'800);
  CHECK(c0.forwarded == 1);
  // TP: CCA at 100800, data 100992..102496, sink ack 102688..103040.
  CHECK(c0.tp_end == 103'040);
  CHECK(s.router->cycles().at(1).cycle_start == 103'040);
  // round(0.9 * 80000 + 0.1 * 2656) = round(72265.6)
  CHECK(s.router->cycles().at(1).wp == 72'266);
  CHECK(s.at_sink == std::vector<std::uint64_t>{77});
}

TEST_CASE("leaf radio is off whenever it sleeps") {
  Star s;
  s.build(1);
  s.arrive(0, 50, 1);
  bool checked = false;
  // Sample the leaf state on a fine grid.
  for (sim::SimTime t = 0; t < 300'000; t += 97) {
    s.b.sim.schedule(t, [&s, &checked] {
      const auto ph = s.leaves[0]->phase();
      if (ph == LeafPhase::Sleep || ph == LeafPhase::SleepUntilWp) {
        checked = true;
        REQUIRE(s.b.medium.power(2) == RadioPower::Off);
      }
    });
  }
  s.b.sim.run_until(300'000);
  CHECK(checked);
}

TEST_CASE("two packets in one WP are sent back to back and forwarded in order") {
  Star s;
  s.build(1);
  s.arrive(0, 10, 5);
  s.arrive(0, 20, 6);
  s.b.sim.run_until(200'000);
  CHECK(s.router->cycles().at(0).received == 2);
  CHECK(s.at_sink == std::vector<std::uint64_t>{5, 6});
  CHECK(s.leaves[0]->wp_wakeups().size() == 1);
}

TEST_CASE("burst cap holds the rest for the next cycle") {
  ScosensParams p;
  p.leaf_burst_cap = 1;
  Star s(p);
  s.build(1);
  s.arrive(0, 10, 5);
  s.arrive(0, 20, 6);
  s.b.sim.run_until(300'000);
  CHECK(s.router->cycles().at(0).received == 1);
  CHECK(s.router->cycles().at(1).received == 1);
  CHECK(s.at_sink == std::vector<std::uint64_t>{5, 6});
}

TEST_CASE("TP disabled: packets terminate at the router") {
  ScosensParams p;
  p.tp_enabled = false;
  Star s(p);
  s.build(1);
  s.arrive(0, 10, 5);
  s.b.sim.run_until(300'000);
  CHECK(s.terminal == std::vector<std::uint64_t>{5});
  CHECK(s.at_sink.empty());
  for (const auto& r : s.b.records()) {
    if (r.kind == TraceKind::TxStart && r.node == 1) {
      CHECK(r.get("kind") != "data");
    }
  }
}

TEST_CASE("a frame that cannot fit the WP waits for the next beacon") {
  ScosensParams p;
  p.wp_min = p.wp_max = p.wp_initial = 2'000;  // data + ack wait = 2368 us
  Star s(p);
  s.build(1);
  s.arrive(0, 10, 5);
  s.b.sim.run_until(350'000);
  CHECK(s.leaves[0]->pending() == 1);
  CHECK(s.leaves[0]->phase() != LeafPhase::Contend);
  CHECK(s.leaves[0]->wp_wakeups().size() >= 3);
  int full = 0;
  for (const auto& r : s.b.records()) {
    CHECK_FALSE((r.kind == TraceKind::TxStart && r.node == 2));
    full += r.get("leaf") == "window_full" ? 1 : 0;
  }
  CHECK(full >= 3);
}

TEST_CASE("a corrupted beacon leaves the leaf listening for the next one") {
  Star s;
  s.build(1);
  s.b.medium.attach(9, {});
  s.b.medium.set_radio(9, RadioPower::Listening);
  s.arrive(0, 10, 5);
  // Overlaps the first beacon (192..800).
  s.b.sim.schedule(300, [&s] {
    s.b.medium.begin_tx(9, radio::make_data_frame(9, radio::kBroadcast, 0, 10, 0));
  });
  s.b.sim.run_until(250'000);
  REQUIRE(s.leaves[0]->wp_wakeups().size() == 1);
  const auto& c1 = s.router->cycles().at(1);
  CHECK(s.leaves[0]->wp_wakeups()[0] == c1.wp_start);
  CHECK(s.at_sink == std::vector<std::uint64_t>{5});
}

TEST_CASE("leaf queue overflow drops the newest packet") {
  Star s;
  s.build(1, 2);
  s.arrive(0, 10, 1);
  s.arrive(0, 11, 2);
  s.arrive(0, 12, 3);
  s.b.sim.run_until(20);
  REQUIRE(s.dropped.size() == 1);
  CHECK(s.dropped[0].first == 3);
  CHECK(s.dropped[0].second == DropReason::QueueFull);
}

TEST_CASE("a beacon heard mid-backoff ends the send and resynchronizes the leaf") {
  ScosensParams p;
  p.wp_min = p.wp_max = p.wp_initial = 10'000;
  Star s(p);
  s.build(1);
  s.b.medium.attach(9, {});
  s.b.medium.set_radio(9, RadioPower::Listening);
  // WP 10000 -> SP 90000: first WP 90800..100800. A 127-byte frame on air
  // 90700..94956 covers the leaf's first two CCAs.
  s.b.sim.schedule(90'700, [&s] {
    s.b.medium.begin_tx(9, radio::make_data_frame(9, radio::kBroadcast, 0, 116, 0));
  });
  // CCA 90800 busy; BE 4, 12 slots -> CCA 94640 busy; BE 5, 31 slots -> 104560.
  s.leaf_draws[0]->values = {0, 12, 31};
  s.arrive(0, 10, 5);
  s.b.sim.run_until(300'000);

  // Next beacon 100992..101600, again with SP 90000.
  const auto& leaf = *s.leaves[0];
  REQUIRE(leaf.wp_wakeups().size() == 2);
  CHECK(leaf.wp_wakeups()[0] == 90'800);
  CHECK(leaf.wp_wakeups()[1] == 101'600 + 90'000);
  CHECK(leaf.wp_wakeups()[1] == s.router->cycles().at(1).wp_start);
  CHECK(s.at_sink == std::vector<std::uint64_t>{5});
  bool late = false;
  for (const auto& r : s.b.records()) {
    if (r.node != 2) {
      continue;
    }
    if (r.get("leaf") == "late_beacon") {
      CHECK(r.time == 101'600);
      late = true;
    }
    if (r.kind == TraceKind::TxStart) {
      CHECK(r.time >= 191'600);
    }
    if (r.kind == TraceKind::RadioOff && r.time > 800 && r.time < 191'600) {
      CHECK(r.time == 101'600);
    }
  }
  CHECK(late);
  // The deferred attempt was not charged: one attempt, one transmission.
  CHECK(leaf.mac().transmissions() == 1);
}
