#include "scosens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace scosens::harness {

std::string_view to_string(PacketOutcome outcome) {
  switch (outcome) {
    case PacketOutcome::AtSink:
      return "at_sink";
    case PacketOutcome::AtRouter:
      return "at_router";
    case PacketOutcome::Dropped:
      return "dropped";
    case PacketOutcome::Queued:
      return "queued";
  }
  return "?";
}

PacketOutcome classify(const PacketRecord& r, Endpoint endpoint) {
  if (r.t_sink_rx) {
    return PacketOutcome::AtSink;
  }
  if (r.t_router_rx) {
    if (endpoint == Endpoint::Router) {
      return PacketOutcome::AtRouter;
    }
    return r.dropped_at_router ? PacketOutcome::Dropped : PacketOutcome::Queued;
  }
  return r.dropped_at_leaf ? PacketOutcome::Dropped : PacketOutcome::Queued;
}

std::optional<double> compute_prr(std::span<const PacketRecord> records, Endpoint endpoint) {
  if (records.empty()) {
    return std::nullopt;
  }
  const auto delivered = std::count_if(records.begin(), records.end(), [endpoint](const auto& r) {
    return r.arrival(endpoint).has_value();
  });
  return static_cast<double>(delivered) / static_cast<double>(records.size());
}

DelaySummary compute_delays(std::span<const PacketRecord> records, Endpoint endpoint) {
  std::vector<double> delays;
  for (const auto& r : records) {
    if (auto at = r.arrival(endpoint)) {
      delays.push_back(static_cast<double>(*at - r.t_generated));
    }
  }
  DelaySummary s;
  s.count = delays.size();
  if (delays.empty()) {
    return s;
  }
  std::sort(delays.begin(), delays.end());
  const std::size_t n = delays.size();
  s.mean_us = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(n);
  s.median_us = n % 2 == 1 ? delays[n / 2] : (delays[n / 2 - 1] + delays[n / 2]) / 2.0;
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_us = delays[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

namespace {

template <typename T>
void kv(std::ostream& out, std::string_view key, const std::optional<T>& value) {
  out << key << '=';
  if (value) {
    out << *value;
  } else {
    out << "absent";
  }
  out << '\n';
}

template <typename T>
void kv(std::ostream& out, std::string_view key, const T& value) {
  out << key << '=' << value << '\n';
}

}  // namespace

void write_summary(std::ostream& out, const MetricsReport& m) {
  const auto old_flags = out.flags();
  const auto old_precision = out.precision();
  out << std::setprecision(10);
  kv(out, "prr", m.prr);
  kv(out, "delay_count", m.delay.count);
  kv(out, "delay_mean_us", m.delay.mean_us);
  kv(out, "delay_median_us", m.delay.median_us);
  kv(out, "delay_p95_us", m.delay.p95_us);
  kv(out, "generated", m.generated);
  kv(out, "delivered", m.delivered);
  kv(out, "total_generated", m.total_generated);
  kv(out, "at_sink", m.at_sink);
  kv(out, "at_router", m.at_router);
  kv(out, "dropped", m.dropped);
  kv(out, "queued", m.queued);
  kv(out, "queued_observed", m.queued_observed);
  kv(out, "accounting_ok", m.accounting_ok() ? "true" : "false");
  kv(out, "transmissions", m.transmissions);
  kv(out, "collisions", m.collisions);
  kv(out, "csma_failures", m.csma_failures);
  kv(out, "beacons", m.beacons);
  kv(out, "cycles", m.cycles);
  kv(out, "leaf_duty_mean", m.leaf_duty_mean);
  kv(out, "router_duty", m.router_duty);
  kv(out, "sink_duty", m.sink_duty);
  for (const auto& d : m.duty) {
    out << "duty." << d.node << '.' << d.role << '=' << d.duty_cycle << '\n';
  }
  out.flags(old_flags);
  out.precision(old_precision);
}

}  // namespace scosens::harness
