#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <deque>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scosens/mac_csma.hpp"
#include "scosens/radio_medium.hpp"
#include "scosens/sim_core.hpp"
#include "scosens/trace.hpp"

namespace scosens::testing {

/// Simulator + medium with a trace captured into a string.
struct Bench {
  sim::Simulator sim;
  std::ostringstream trace_text;
  Trace trace{trace_text};
  radio::Medium medium{sim, trace};

  std::vector<TraceRecord> records() const {
    std::vector<TraceRecord> out;
    std::istringstream in(trace_text.str());
    std::string line;
    while (std::getline(in, line)) {
      auto r = parse_trace_line(line);
      if (!r) {
        throw std::runtime_error("unparsable trace line: " + line);
      }
      out.push_back(*r);
    }
    return out;
  }
};

/// Backoff draws taken from a script; records the slot counts requested.
struct ScriptedDraw {
  std::deque<std::uint64_t> values;
  std::vector<std::uint64_t> requested;
  std::uint64_t fallback = 0;

  mac::BackoffDraw fn() {
    return [this](std::uint64_t slots) {
      requested.push_back(slots);
      if (values.empty()) {
        return fallback;
      }
      const auto v = values.front();
      values.pop_front();
      return v;
    };
  }
};

/// Hand-rolled generator for property tests; independent of the library's
/// RandomSource so a bug there cannot mask itself.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : state_(seed * 2654435761ULL + 1) {}
  std::uint64_t next() {
    // xorshift64*
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

}  // namespace scosens::testing
