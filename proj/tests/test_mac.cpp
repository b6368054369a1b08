#include <optional>

#include "doctest.h"
#include "scosens/mac_csma.hpp"
#include "support.hpp"

using namespace scosens;
using namespace scosens::mac;
using radio::RadioPower;
using scosens::testing::Bench;
using scosens::testing::ScriptedDraw;

namespace {

// Sender 1 with a CsmaMac, receiver 2 with an AckResponder.
struct Link {
  Bench b;
  ScriptedDraw draw;
  CsmaParams params;
  std::optional<CsmaMac> mac;
  std::optional<AckResponder> rx;
  std::vector<Frame> delivered;
  std::optional<SendResult> result;
  sim::SimTime done_at = 0;

  explicit Link(bool receiver_on = true, CsmaParams p = {}) : params(p) {
    mac.emplace(b.sim, b.medium, b.trace, 1, params, draw.fn());
    rx.emplace(b.sim, b.medium, b.trace, 2, params.turnaround);
    b.medium.attach(1, [this](const Frame& f) { mac->on_ack(f); });
    b.medium.attach(2, [this](const Frame& f) {
      if (rx->on_frame(f) == AckResponder::Verdict::Deliver) {
        delivered.push_back(f);
      }
    });
    b.medium.set_radio(1, RadioPower::Listening);
    if (receiver_on) {
      b.medium.set_radio(2, RadioPower::Listening);
    }
  }

  void send_at(sim::SimTime t, Frame f, int used = 0, std::optional<sim::SimTime> deadline = {}) {
    b.sim.schedule(t, [this, f, used, deadline] {
      mac->send(SendRequest{f, used, deadline}, [this](const SendResult& r) {
        result = r;
        done_at = b.sim.now();
      });
    });
  }
};

// Node 3 keeps the channel busy with back-to-back 127-byte broadcasts.
void jam(Bench& b, sim::SimTime until) {
  if (b.sim.now() >= until) {
    return;
  }
  b.medium.begin_tx(3, radio::make_data_frame(3, radio::kBroadcast, 0, 116, 0),
                    [&b, until] { jam(b, until); });
}

constexpr sim::Duration kData41 = (6 + 41) * 32;
constexpr sim::Duration kAck = (6 + 5) * 32;

}  // namespace

TEST_CASE("sole sender is delivered on the first attempt with exact timing") {
  Link l;
  l.draw.values = {2};
  l.send_at(1000, radio::make_data_frame(1, 2, 7, 30, 1));
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Delivered);
  CHECK(l.result->transmissions == 1);
  CHECK(l.result->attempts_used == 1);
  // backoff 2 * 320, turnaround 192, data airtime, turnaround, ack airtime
  const sim::SimTime tx_start = 1000 + 2 * 320 + 192;
  const sim::SimTime ack_start = tx_start + kData41 + 192;
  CHECK(l.done_at == ack_start + kAck);
  REQUIRE(l.delivered.size() == 1);
  CHECK(l.delivered[0].seq == 7);
  CHECK(l.draw.requested == std::vector<std::uint64_t>{8});

  bool saw_ack = false;
  for (const auto& r : l.b.records()) {
    if (r.kind == TraceKind::Ack) {
      CHECK(r.time == ack_start);
      CHECK(r.get("seq") == "7");
      saw_ack = true;
    }
  }
  CHECK(saw_ack);
}

TEST_CASE("receiver off: NoAck after exactly max_frame_attempts transmissions") {
  Link l(/*receiver_on=*/false);
  l.send_at(0, radio::make_data_frame(1, 2, 1, 30, 1));
  l.b.sim.run_until(1'000'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::NoAck);
  CHECK(l.result->transmissions == 8);
  CHECK(l.result->attempts_used == 8);
  CHECK(l.mac->transmissions() == 8);
  // BE resets to min_be for every frame attempt.
  CHECK(l.draw.requested == std::vector<std::uint64_t>(8, 8));
}

TEST_CASE("first backoff is drawn from {0..7} x 320 us") {
  for (std::uint64_t slot = 0; slot < 8; ++slot) {
    Link l;
    l.draw.values = {slot};
    l.send_at(0, radio::make_data_frame(1, 2, 1, 30, 1));
    l.b.sim.run_until(100'000);
    for (const auto& r : l.b.records()) {
      if (r.node == 1 && r.get("mac") == "backoff") {
        CHECK(*r.get_u64("delay") == slot * 320);
      }
    }
  }
}

TEST_CASE("busy channel escalates BE and ends in channel access failure") {
  CsmaParams p;
  p.retry_after_caf = false;
  Link l(true, p);
  l.b.medium.attach(3, {});
  l.b.medium.set_radio(3, RadioPower::Listening);
  l.b.sim.schedule(0, [&l] { jam(l.b, 100'000); });
  l.draw.fallback = 1;
  l.send_at(10, radio::make_data_frame(1, 2, 1, 30, 1));
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::ChannelAccessFailure);
  CHECK(l.result->transmissions == 0);
  CHECK(l.result->attempts_used == 1);
  // nb = 0..4 are retried, the fifth busy CCA gives up: BE 3,4,5,5,5.
  CHECK(l.draw.requested == std::vector<std::uint64_t>{8, 16, 32, 32, 32});
  CHECK(l.mac->channel_access_failures() == 1);
}

TEST_CASE("channel access failure consumes an attempt when retried") {
  Link l;
  l.b.medium.attach(3, {});
  l.b.medium.set_radio(3, RadioPower::Listening);
  l.b.sim.schedule(0, [&l] { jam(l.b, 2'000'000); });
  l.draw.fallback = 1;
  l.send_at(10, radio::make_data_frame(1, 2, 1, 30, 1));
  l.b.sim.run_until(2'000'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::ChannelAccessFailure);
  CHECK(l.result->attempts_used == 8);
  CHECK(l.mac->channel_access_failures() == 8);
}

TEST_CASE("broadcast completes after one transmission without an ack") {
  Link l;
  l.send_at(0, radio::make_data_frame(1, radio::kBroadcast, 3, 10, 1));
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Unconfirmed);
  CHECK(l.result->transmissions == 1);
  CHECK(l.rx->acks_sent() == 0);
}

TEST_CASE("deadline defers without spending an attempt") {
  Link l;
  l.draw.values = {0};
  // CCA at 0, data would end at 192 + 1504 and the ack wait at +864.
  l.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1), 2, sim::SimTime{192 + 1504 + 864 - 1});
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Deferred);
  CHECK(l.result->attempts_used == 2);
  CHECK(l.result->transmissions == 0);

  Link ok;
  ok.draw.values = {0};
  ok.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1), 0, sim::SimTime{192 + 1504 + 864});
  ok.b.sim.run_until(100'000);
  CHECK(ok.result->outcome == TxOutcome::Delivered);
}

TEST_CASE("attempts carried over from an earlier send count toward the cap") {
  Link l(false);
  l.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1), 6);
  l.b.sim.run_until(1'000'000);
  CHECK(l.result->outcome == TxOutcome::NoAck);
  CHECK(l.result->transmissions == 2);
  CHECK(l.result->attempts_used == 8);
}

TEST_CASE("duplicates are acked but delivered once") {
  Bench b;
  AckResponder rx(b.sim, b.medium, b.trace, 2, 192);
  b.medium.attach(2, {});
  b.medium.set_radio(2, RadioPower::Listening);
  const Frame f = radio::make_data_frame(1, 2, 9, 30, 1);
  std::vector<AckResponder::Verdict> v;
  b.sim.schedule(0, [&] { v.push_back(rx.on_frame(f)); });
  b.sim.schedule(5000, [&] { v.push_back(rx.on_frame(f)); });
  b.sim.schedule(10000, [&] {
    Frame g = f;
    g.seq = 10;
    v.push_back(rx.on_frame(g));
  });
  b.sim.schedule(15000, [&] { v.push_back(rx.on_frame(radio::make_beacon_frame(1, 0, {1, 2}))); });
  b.sim.schedule(16000, [&] { v.push_back(rx.on_frame(radio::make_data_frame(1, 3, 0, 3, 0))); });
  b.sim.run_until(20000);
  using V = AckResponder::Verdict;
  CHECK(v == std::vector<V>{V::Deliver, V::Duplicate, V::Deliver, V::NotForUs, V::NotForUs});
  CHECK(rx.acks_sent() == 3);
}

TEST_CASE("ack is skipped when the radio was switched off") {
  Bench b;
  AckResponder rx(b.sim, b.medium, b.trace, 2, 192);
  b.medium.attach(2, {});
  b.medium.set_radio(2, RadioPower::Listening);
  b.sim.schedule(0, [&] {
    rx.on_frame(radio::make_data_frame(1, 2, 0, 3, 0));
    b.medium.set_radio(2, RadioPower::Off);
  });
  b.sim.run_until(1000);
  CHECK(rx.acks_sent() == 0);
  CHECK(rx.acks_skipped() == 1);
}

TEST_CASE("send preconditions") {
  Link l;
  l.b.medium.set_radio(1, RadioPower::Off);
  CHECK_THROWS_AS(l.mac->send({radio::make_data_frame(1, 2, 0, 3, 0), 0, std::nullopt}, {}),
                  radio::ProtocolViolation);
  l.b.medium.set_radio(1, RadioPower::Listening);
  l.mac->send({radio::make_data_frame(1, 2, 0, 3, 0), 0, std::nullopt}, {});
  CHECK_THROWS_AS(l.mac->send({radio::make_data_frame(1, 2, 0, 3, 0), 0, std::nullopt}, {}),
                  radio::ProtocolViolation);
  CsmaParams bad;
  bad.min_be = 6;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("cut_off during backoff defers at once without charging the attempt") {
  Link l;
  l.draw.values = {5};
  l.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1), 3);
  l.b.sim.schedule(1000, [&l] { l.mac->cut_off(); });
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Deferred);
  CHECK(l.done_at == 1000);
  CHECK(l.result->attempts_used == 3);
  CHECK(l.mac->transmissions() == 0);
  CHECK_FALSE(l.mac->in_flight());
  // Idle: no effect.
  l.mac->cut_off();
}

TEST_CASE("cut_off after the frame left lets the exchange finish") {
  Link l;
  l.draw.values = {0};
  l.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1));
  // Data on air 192..1696.
  l.b.sim.schedule(500, [&l] { l.mac->cut_off(); });
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Delivered);
  CHECK(l.done_at == 192 + kData41 + 192 + kAck);
}

TEST_CASE("cut_off while awaiting an ack defers the retry") {
  Link l(false);
  l.draw.values = {0, 0};
  l.send_at(0, radio::make_data_frame(1, 2, 3, 30, 1));
  l.b.sim.schedule(500, [&l] { l.mac->cut_off(); });
  l.b.sim.run_until(100'000);
  REQUIRE(l.result);
  CHECK(l.result->outcome == TxOutcome::Deferred);
  CHECK(l.result->transmissions == 1);
  // First attempt spent; the second never went on air.
  CHECK(l.result->attempts_used == 1);
}
