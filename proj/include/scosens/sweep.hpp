#pragma once

// Protocol x PAI grid with seed replicates, run in parallel, aggregated per
// (protocol, pai) cell.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "scosens/config.hpp"
#include "scosens/metrics.hpp"

namespace scosens::harness {

struct SweepGrid {
  ScenarioConfig base;
  /// Table column order.
  std::vector<Protocol> protocols{Protocol::Lpl, Protocol::Scosens};
  /// Table row order.
  std::vector<Duration> pais{1'500'000, 1'000'000, 500'000, 100'000};
  /// Replicate r uses seed base.seed + r.
  int replicates = 5;
  /// Worker threads; 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct SweepRun {
  Protocol protocol = Protocol::Scosens;
  Duration pai = 0;
  std::uint64_t seed = 0;
  std::optional<MetricsReport> report;
  /// Set when the run failed; report is then empty.
  std::string error;
};

/// Mean and sample standard deviation (n - 1); stddev is 0 for n < 2.
struct Stat {
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
};
Stat summarize(const std::vector<double>& values);

struct SweepCell {
  Protocol protocol = Protocol::Scosens;
  Duration pai = 0;
  int runs = 0;
  int failures = 0;
  Stat prr;
  /// Over each run's mean delay, in microseconds.
  Stat delay_mean_us;
  Stat leaf_duty;
  Stat router_duty;
  Stat collisions;
  Stat csma_failures;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  /// Accounting identity held in every successful run of the cell.
  bool accounting_ok = true;
};

struct SweepResult {
  std::vector<SweepRun> runs;
  /// protocols x pais, row-major by pai.
  std::vector<SweepCell> cells;

  std::size_t failed_runs() const;
  const SweepCell* cell(Protocol protocol, Duration pai) const;
};

/// Runs every cell; one failing run never stops the others.
SweepResult run_sweep(const SweepGrid& grid);

/// Long format, one row per (protocol, pai) cell.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
/// Paper layout: one row per PAI, one mean/stddev column pair per protocol.
void write_prr_table(std::ostream& out, const SweepGrid& grid, const SweepResult& result);
void write_delay_table(std::ostream& out, const SweepGrid& grid, const SweepResult& result);

}  // namespace scosens::harness
