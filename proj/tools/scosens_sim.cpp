// scosens_sim: run one scenario or the protocol x PAI sweep.
//
//   scosens_sim --protocol scosens --pai-ms 500 --out-dir out --trace
//   scosens_sim --sweep --replicates 5 --out-dir sweep
//
// Exit status: 0 ok, 1 config error, 2 runtime fault, 3 some sweep runs failed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "scosens/config.hpp"
#include "scosens/scenario.hpp"
#include "scosens/sweep.hpp"

namespace fs = std::filesystem;
using namespace scosens;
using namespace scosens::harness;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  return out;
}

int run_single(const ScenarioConfig& cfg, const fs::path& dir, bool trace) {
  std::optional<std::ofstream> trace_file;
  if (trace) {
    trace_file = open_out(dir / "trace.txt");
  }
  const ScenarioResult result = run_scenario(cfg, trace_file ? &*trace_file : nullptr);
  if (trace_file) {
    trace_file->flush();
    if (!*trace_file) {
      throw std::runtime_error("error writing trace.txt");
    }
  }
  auto summary = open_out(dir / "summary.txt");
  summary << "protocol=" << to_string(cfg.protocol) << '\n'
          << "seed=" << cfg.seed << '\n'
          << "pai_us=" << cfg.pai << '\n'
          << "duration_us=" << cfg.duration << '\n';
  write_summary(summary, result.report);
  auto config_copy = open_out(dir / "config.txt");
  write_config(config_copy, cfg);

  const auto& m = result.report;
  std::cout << to_string(cfg.protocol) << " pai=" << cfg.pai / 1000 << "ms seed=" << cfg.seed
            << " prr=";
  if (m.prr) {
    std::cout << *m.prr;
  } else {
    std::cout << "absent";
  }
  std::cout << " delay_mean_ms=";
  if (m.delay.mean_us) {
    std::cout << *m.delay.mean_us / 1000.0;
  } else {
    std::cout << "absent";
  }
  std::cout << " leaf_duty=" << m.leaf_duty_mean << '\n';
  return m.accounting_ok() ? 0 : kExitRuntime;
}

int run_sweep_cli(const ScenarioConfig& cfg, const fs::path& dir, int replicates) {
  SweepGrid grid;
  grid.base = cfg;
  grid.replicates = replicates;
  const SweepResult result = run_sweep(grid);

  auto csv = open_out(dir / "sweep.csv");
  write_sweep_csv(csv, result);
  auto prr = open_out(dir / "prr_table.csv");
  write_prr_table(prr, grid, result);
  auto delay = open_out(dir / "delay_table.csv");
  write_delay_table(delay, grid, result);

  fs::create_directories(dir / "runs");
  for (const auto& run : result.runs) {
    const std::string name = std::string(to_string(run.protocol)) + "_" +
                             std::to_string(run.pai / 1000) + "ms_seed" +
                             std::to_string(run.seed) + ".txt";
    auto out = open_out(dir / "runs" / name);
    if (run.report) {
      write_summary(out, *run.report);
    } else {
      out << "error=" << run.error << '\n';
      std::cerr << "run failed: " << name << ": " << run.error << '\n';
    }
  }
  write_prr_table(std::cout, grid, result);
  write_delay_table(std::cout, grid, result);
  return result.failed_runs() == 0 ? 0 : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"S-CoSenS / LPL star-topology simulator"};
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> protocol;
  std::optional<std::uint64_t> pai_ms;
  std::optional<std::uint64_t> duration_s;
  std::string out_dir = "out";
  bool trace = false;
  bool sweep = false;
  int replicates = 5;

  app.add_option("--config", config_path, "Config file (key = value with [sections])");
  app.add_option("--seed", seed, "Scenario seed (sweep: first replicate's seed)");
  app.add_option("--protocol", protocol, "scosens or lpl")
      ->check(CLI::IsMember({"scosens", "lpl"}));
  app.add_option("--pai-ms", pai_ms, "Packet arrival interval per leaf, ms");
  app.add_option("--duration-s", duration_s, "Simulated time, s");
  app.add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  app.add_flag("--trace", trace, "Write trace.txt (single run only)");
  app.add_flag("--sweep", sweep, "Run protocols x PAI {1500,1000,500,100} ms");
  app.add_option("--replicates", replicates, "Seeds per sweep cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  ScenarioConfig cfg;
  try {
    if (!config_path.empty()) {
      cfg = load_config_file(config_path);
    }
    if (seed) {
      cfg.seed = *seed;
    }
    if (protocol) {
      cfg.protocol = protocol_from_string(*protocol);
    }
    if (pai_ms) {
      cfg.pai = *pai_ms * 1000;
    }
    if (duration_s) {
      cfg.duration = *duration_s * 1'000'000;
    }
    cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    return sweep ? run_sweep_cli(cfg, dir, replicates) : run_single(cfg, dir, trace);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << '\n';
    return kExitRuntime;
  }
}
