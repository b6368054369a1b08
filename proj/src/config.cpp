#include "scosens/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace scosens::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view section, std::string_view key,
                            std::string_view value, std::string_view expected) {
  std::ostringstream os;
  os << "[" << section << "] " << key << ": '" << value << "' is not " << expected;
  throw ConfigError(os.str());
}

std::uint64_t parse_u64(std::string_view section, std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    bad_value(section, key, v, "a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view section, std::string_view key, std::string_view v) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    bad_value(section, key, v, "a number");
  }
  return out;
}

bool parse_bool(std::string_view section, std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    return false;
  }
  bad_value(section, key, v, "a boolean");
}

struct Setting {
  std::string_view section;
  std::string_view key;
  std::function<void(ScenarioConfig&, std::string_view)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

template <typename T>
std::string str(const T& v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Unsigned integer field; FIELD is a member path such as csma.min_be.
#define U64_SETTING(SECTION, KEY, FIELD)                                              \
  Setting {                                                                            \
    SECTION, KEY,                                                                      \
        [](ScenarioConfig& c, std::string_view v) {                                    \
          c.FIELD = static_cast<decltype(c.FIELD)>(parse_u64(SECTION, KEY, v));        \
        },                                                                             \
        [](const ScenarioConfig& c) { return str(c.FIELD); }                           \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      U64_SETTING("scenario", "seed", seed),
      Setting{"scenario", "protocol",
              [](ScenarioConfig& c, std::string_view v) { c.protocol = protocol_from_string(v); },
              [](const ScenarioConfig& c) { return std::string(to_string(c.protocol)); }},
      U64_SETTING("scenario", "n_leaves", n_leaves),
      Setting{"scenario", "pai_ms",
              [](ScenarioConfig& c, std::string_view v) {
                c.pai = parse_u64("scenario", "pai_ms", v) * 1000;
              },
              [](const ScenarioConfig& c) { return str(c.pai / 1000); }},
      U64_SETTING("scenario", "pai_us", pai),
      Setting{"scenario", "duration_s",
              [](ScenarioConfig& c, std::string_view v) {
                c.duration = parse_u64("scenario", "duration_s", v) * 1'000'000;
              },
              [](const ScenarioConfig& c) { return str(c.duration / 1'000'000); }},
      U64_SETTING("scenario", "duration_us", duration),
      U64_SETTING("scenario", "payload_len", payload_len),
      Setting{"scenario", "traffic",
              [](ScenarioConfig& c, std::string_view v) {
                if (v == "periodic") {
                  c.traffic = TrafficModel::Periodic;
                } else if (v == "poisson") {
                  c.traffic = TrafficModel::Poisson;
                } else {
                  bad_value("scenario", "traffic", v, "periodic or poisson");
                }
              },
              [](const ScenarioConfig& c) { return std::string(to_string(c.traffic)); }},
      U64_SETTING("scenario", "queue_capacity", queue_capacity),
      U64_SETTING("scenario", "router_queue_capacity", router_queue_capacity),
      U64_SETTING("scenario", "warmup_cycles", warmup_cycles),
      U64_SETTING("scenario", "quantization_us", quantization),

      U64_SETTING("scosens", "subframe_us", scosens.subframe),
      Setting{"scosens", "alpha",
              [](ScenarioConfig& c, std::string_view v) {
                c.scosens.alpha = parse_double("scosens", "alpha", v);
              },
              [](const ScenarioConfig& c) { return str(c.scosens.alpha); }},
      U64_SETTING("scosens", "wp_min_us", scosens.wp_min),
      U64_SETTING("scosens", "wp_max_us", scosens.wp_max),
      U64_SETTING("scosens", "wp_initial_us", scosens.wp_initial),
      Setting{"scosens", "tp_enabled",
              [](ScenarioConfig& c, std::string_view v) {
                c.scosens.tp_enabled = parse_bool("scosens", "tp_enabled", v);
              },
              [](const ScenarioConfig& c) {
                return std::string(c.scosens.tp_enabled ? "true" : "false");
              }},
      U64_SETTING("scosens", "leaf_burst_cap", scosens.leaf_burst_cap),
      Setting{"scosens", "window_check",
              [](ScenarioConfig& c, std::string_view v) {
                if (v == "send") {
                  c.scosens.window_check = rdc::WindowCheck::BeforeSend;
                } else if (v == "transmission") {
                  c.scosens.window_check = rdc::WindowCheck::BeforeEachTx;
                } else {
                  bad_value("scosens", "window_check", v, "send or transmission");
                }
              },
              [](const ScenarioConfig& c) {
                return std::string(rdc::to_string(c.scosens.window_check));
              }},

      U64_SETTING("lpl", "check_interval_us", lpl.check_interval),
      U64_SETTING("lpl", "check_duration_us", lpl.check_duration),
      U64_SETTING("lpl", "strobe_gap_us", lpl.strobe_gap),
      U64_SETTING("lpl", "listen_timeout_us", lpl.listen_timeout),
      U64_SETTING("lpl", "retry_backoff_unit_us", lpl.retry_backoff_unit),

      U64_SETTING("csma", "backoff_period_us", csma.backoff_period),
      U64_SETTING("csma", "min_be", csma.min_be),
      U64_SETTING("csma", "max_be", csma.max_be),
      U64_SETTING("csma", "max_csma_backoffs", csma.max_csma_backoffs),
      // Shared by the CSMA and LPL attempt loops.
      Setting{"csma", "max_frame_attempts",
              [](ScenarioConfig& c, std::string_view v) {
                const auto n = static_cast<int>(parse_u64("csma", "max_frame_attempts", v));
                c.csma.max_frame_attempts = n;
                c.lpl.max_frame_attempts = n;
              },
              [](const ScenarioConfig& c) { return str(c.csma.max_frame_attempts); }},
      U64_SETTING("csma", "ack_wait_us", csma.ack_wait),
      U64_SETTING("csma", "turnaround_us", csma.turnaround),
      Setting{"csma", "retry_after_caf",
              [](ScenarioConfig& c, std::string_view v) {
                c.csma.retry_after_caf = parse_bool("csma", "retry_after_caf", v);
              },
              [](const ScenarioConfig& c) {
                return std::string(c.csma.retry_after_caf ? "true" : "false");
              }},
  };
  return table;
}

#undef U64_SETTING

// Convenience spellings of exact microsecond keys; skipped on output.
bool is_alias(std::string_view section, std::string_view key) {
  return section == "scenario" && (key == "pai_ms" || key == "duration_s");
}

}  // namespace

std::string_view to_string(Protocol protocol) {
  return protocol == Protocol::Scosens ? "scosens" : "lpl";
}

Protocol protocol_from_string(std::string_view text) {
  if (text == "scosens") {
    return Protocol::Scosens;
  }
  if (text == "lpl") {
    return Protocol::Lpl;
  }
  throw ConfigError("unknown protocol '" + std::string(text) + "' (expected scosens or lpl)");
}

std::string_view to_string(TrafficModel model) {
  return model == TrafficModel::Periodic ? "periodic" : "poisson";
}

void ScenarioConfig::validate() const {
  if (duration == 0) {
    throw ConfigError("[scenario] duration must be > 0");
  }
  if (n_leaves < 1 || n_leaves > 1000) {
    throw ConfigError("[scenario] n_leaves must be in [1, 1000]");
  }
  if (pai == 0) {
    throw ConfigError("[scenario] pai must be > 0");
  }
  if (payload_len + radio::kDataHeaderLen > radio::kMaxMpduLen) {
    throw ConfigError("[scenario] payload_len must be <= 116 bytes");
  }
  if (queue_capacity == 0 || router_queue_capacity == 0) {
    throw ConfigError("[scenario] queue capacities must be >= 1");
  }
  if (warmup_cycles < 0) {
    throw ConfigError("[scenario] warmup_cycles must be >= 0");
  }
  if (quantization == 0) {
    throw ConfigError("[scenario] quantization_us must be >= 1 (1 disables it)");
  }
  try {
    scosens.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[scosens] ") + e.what());
  }
  try {
    lpl.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[lpl] ") + e.what());
  }
  try {
    csma.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[csma] ") + e.what());
  }
}

void apply_setting(ScenarioConfig& config, std::string_view section, std::string_view key,
                   std::string_view value) {
  for (const auto& s : settings()) {
    if (s.section == section && s.key == key) {
      s.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown setting [" + std::string(section) + "] " + std::string(key));
}

ScenarioConfig parse_config(std::istream& in, ScenarioConfig base) {
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "scenario" && section != "scosens" && section != "lpl" &&
          section != "csma") {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section +
                          "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": setting outside a section");
    }
    try {
      apply_setting(base, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ScenarioConfig load_config_file(const std::string& path, ScenarioConfig base) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const ScenarioConfig& config) {
  std::string_view current;
  for (const auto& s : settings()) {
    if (is_alias(s.section, s.key)) {
      continue;
    }
    if (s.section != current) {
      if (!current.empty()) {
        out << '\n';
      }
      out << '[' << s.section << "]\n";
      current = s.section;
    }
    out << s.key << " = " << s.get(config) << '\n';
  }
}

}  // namespace scosens::harness
