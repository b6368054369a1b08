#include "scosens/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <ostream>
#include <thread>

#include "scosens/scenario.hpp"

namespace scosens::harness {

Stat summarize(const std::vector<double>& values) {
  Stat s;
  s.n = values.size();
  if (values.empty()) {
    return s;
  }
  double sum = 0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double sq = 0;
    for (double v : values) {
      sq += (v - s.mean) * (v - s.mean);
    }
    s.stddev = std::sqrt(sq / static_cast<double>(s.n - 1));
  }
  return s;
}

std::size_t SweepResult::failed_runs() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const SweepRun& r) { return !r.report; }));
}

const SweepCell* SweepResult::cell(Protocol protocol, Duration pai) const {
  for (const auto& c : cells) {
    if (c.protocol == protocol && c.pai == pai) {
      return &c;
    }
  }
  return nullptr;
}

SweepResult run_sweep(const SweepGrid& grid) {
  grid.base.validate();
  SweepResult result;
  for (Duration pai : grid.pais) {
    for (Protocol p : grid.protocols) {
      for (int r = 0; r < grid.replicates; ++r) {
        result.runs.push_back(SweepRun{p, pai, grid.base.seed + static_cast<std::uint64_t>(r),
                                       std::nullopt, {}});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.runs.size(); i = next++) {
      SweepRun& run = result.runs[i];
      ScenarioConfig cfg = grid.base;
      cfg.protocol = run.protocol;
      cfg.pai = run.pai;
      cfg.seed = run.seed;
      try {
        run.report = run_scenario(cfg).report;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
    }
  };
  unsigned threads = grid.threads != 0 ? grid.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(
                                                 result.runs.size(), 1)));
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t + 1 < threads; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  pool.clear();

  for (Duration pai : grid.pais) {
    for (Protocol p : grid.protocols) {
      SweepCell cell;
      cell.protocol = p;
      cell.pai = pai;
      std::vector<double> prr, delay, leaf, router, coll, caf;
      for (const auto& run : result.runs) {
        if (run.protocol != p || run.pai != pai) {
          continue;
        }
        ++cell.runs;
        if (!run.report) {
          ++cell.failures;
          continue;
        }
        const MetricsReport& m = *run.report;
        if (m.prr) {
          prr.push_back(*m.prr);
        }
        if (m.delay.mean_us) {
          delay.push_back(*m.delay.mean_us);
        }
        leaf.push_back(m.leaf_duty_mean);
        router.push_back(m.router_duty);
        coll.push_back(static_cast<double>(m.collisions));
        caf.push_back(static_cast<double>(m.csma_failures));
        cell.generated += m.generated;
        cell.delivered += m.delivered;
        cell.accounting_ok = cell.accounting_ok && m.accounting_ok();
      }
      cell.prr = summarize(prr);
      cell.delay_mean_us = summarize(delay);
      cell.leaf_duty = summarize(leaf);
      cell.router_duty = summarize(router);
      cell.collisions = summarize(coll);
      cell.csma_failures = summarize(caf);
      result.cells.push_back(cell);
    }
  }
  return result;
}

namespace {

struct FormatGuard {
  explicit FormatGuard(std::ostream& out)
      : out_(out), flags_(out.flags()), precision_(out.precision()) {
    out_ << std::setprecision(6);
  }
  ~FormatGuard() {
    out_.flags(flags_);
    out_.precision(precision_);
  }
  std::ostream& out_;
  std::ios::fmtflags flags_;
  std::streamsize precision_;
};

void write_stat(std::ostream& out, const Stat& s, double scale = 1.0) {
  if (s.n == 0) {
    out << ",";
    return;
  }
  out << s.mean * scale << ',' << s.stddev * scale;
}

void write_paper_table(std::ostream& out, const SweepGrid& grid, const SweepResult& result,
                       const std::function<const Stat&(const SweepCell&)>& pick, double scale,
                       const char* unit) {
  FormatGuard guard(out);
  out << "pai_ms";
  for (Protocol p : grid.protocols) {
    out << ',' << to_string(p) << "_mean" << unit << ',' << to_string(p) << "_stddev" << unit;
  }
  out << '\n';
  for (Duration pai : grid.pais) {
    out << pai / 1000;
    for (Protocol p : grid.protocols) {
      out << ',';
      if (const SweepCell* c = result.cell(p, pai)) {
        write_stat(out, pick(*c), scale);
      } else {
        out << ',';
      }
    }
    out << '\n';
  }
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  FormatGuard guard(out);
  out << "protocol,pai_ms,runs,failures,prr_mean,prr_stddev,delay_mean_ms,delay_stddev_ms,"
         "leaf_duty_mean,leaf_duty_stddev,router_duty_mean,router_duty_stddev,"
         "collisions_mean,collisions_stddev,csma_failures_mean,csma_failures_stddev,"
         "generated,delivered,accounting_ok\n";
  for (const auto& c : result.cells) {
    out << to_string(c.protocol) << ',' << c.pai / 1000 << ',' << c.runs << ',' << c.failures
        << ',';
    write_stat(out, c.prr);
    out << ',';
    write_stat(out, c.delay_mean_us, 1e-3);
    out << ',';
    write_stat(out, c.leaf_duty);
    out << ',';
    write_stat(out, c.router_duty);
    out << ',';
    write_stat(out, c.collisions);
    out << ',';
    write_stat(out, c.csma_failures);
    out << ',' << c.generated << ',' << c.delivered << ',' << (c.accounting_ok ? "true" : "false")
        << '\n';
  }
}

void write_prr_table(std::ostream& out, const SweepGrid& grid, const SweepResult& result) {
  write_paper_table(
      out, grid, result, [](const SweepCell& c) -> const Stat& { return c.prr; }, 1.0, "");
}

void write_delay_table(std::ostream& out, const SweepGrid& grid, const SweepResult& result) {
  write_paper_table(
      out, grid, result, [](const SweepCell& c) -> const Stat& { return c.delay_mean_us; }, 1e-3,
      "_ms");
}

}  // namespace scosens::harness
