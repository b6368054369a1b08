#pragma once

// Scenario configuration and its flat text format:
//
//   # comment
//   [scenario]
//   protocol = scosens
//   pai_ms = 1500
//   [scosens]
//   alpha = 0.9
//
// Sections: scenario, scosens, lpl, csma. Unknown sections or keys are
// rejected. See docs/config.md for the full key list.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "scosens/mac_csma.hpp"
#include "scosens/rdc_lpl.hpp"
#include "scosens/rdc_scosens.hpp"

namespace scosens::harness {

using sim::Duration;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Protocol : std::uint8_t { Scosens, Lpl };
std::string_view to_string(Protocol protocol);
Protocol protocol_from_string(std::string_view text);

enum class TrafficModel : std::uint8_t { Periodic, Poisson };
std::string_view to_string(TrafficModel model);

struct ScenarioConfig {
  std::uint64_t seed = 1;
  Duration duration = 300'000'000;
  Protocol protocol = Protocol::Scosens;
  int n_leaves = 10;
  /// Packet arrival interval per leaf.
  Duration pai = 1'500'000;
  /// Application bytes per data frame (MPDU adds 11 header bytes).
  std::size_t payload_len = 30;
  TrafficModel traffic = TrafficModel::Periodic;
  std::size_t queue_capacity = 8;
  std::size_t router_queue_capacity = 64;
  /// Packets generated during the first warmup_cycles subframes are not
  /// counted in PRR or delay.
  int warmup_cycles = 5;
  /// Hardware timer resolution applied to protocol wake-ups; 1 disables it.
  Duration quantization = 32;

  rdc::ScosensParams scosens;
  rdc::LplParams lpl;
  mac::CsmaParams csma;

  Duration warmup() const { return static_cast<Duration>(warmup_cycles) * scosens.subframe; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Apply one `key = value` from `section`. Throws ConfigError.
void apply_setting(ScenarioConfig& config, std::string_view section, std::string_view key,
                   std::string_view value);

/// Parse the text format on top of `base`.
ScenarioConfig parse_config(std::istream& in, ScenarioConfig base = {});
ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base = {});

/// Serialize every setting in the same format (round-trips through
/// parse_config).
void write_config(std::ostream& out, const ScenarioConfig& config);

}  // namespace scosens::harness
