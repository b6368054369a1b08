#pragma once

// Timeline trace: one newline-delimited record per event,
//
//   <time_us> <node_id> <kind> [key=value ...]
//
// Field order is fixed by the emitting call site, so two runs with the same
// seed produce byte-identical files.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "scosens/sim_core.hpp"

namespace scosens {

using NodeId = std::uint16_t;

enum class TraceKind {
  RadioOn,
  RadioOff,
  TxStart,
  TxEnd,
  RxOk,
  RxCollision,
  Beacon,
  Ack,
  State,
};

std::string_view to_string(TraceKind kind);
std::optional<TraceKind> trace_kind_from_string(std::string_view text);

class Trace {
 public:
  /// A disabled trace; records are discarded without being formatted.
  Trace() = default;
  explicit Trace(std::ostream& out) : out_(&out) {}

  bool enabled() const noexcept { return out_ != nullptr; }
  std::uint64_t records_written() const noexcept { return written_; }

  /// Builder for one record; the line is written when it goes out of scope.
  class Line {
   public:
    Line(Trace* trace, sim::SimTime t, NodeId node, TraceKind kind);
    Line(const Line&) = delete;
    Line& operator=(const Line&) = delete;
    ~Line();

    template <typename T>
    Line& field(std::string_view key, const T& value) {
      if (trace_ != nullptr) {
        buf_ << ' ' << key << '=' << value;
      }
      return *this;
    }

   private:
    Trace* trace_;
    std::ostringstream buf_;
  };

  Line record(sim::SimTime t, NodeId node, TraceKind kind) {
    return Line(enabled() ? this : nullptr, t, node, kind);
  }

 private:
  std::ostream* out_ = nullptr;
  std::uint64_t written_ = 0;
};

/// A parsed trace line, for analysis tools and tests.
struct TraceRecord {
  sim::SimTime time = 0;
  NodeId node = 0;
  TraceKind kind = TraceKind::State;
  std::map<std::string, std::string, std::less<>> fields;

  std::optional<std::string> get(std::string_view key) const;
  std::optional<std::uint64_t> get_u64(std::string_view key) const;
};

/// Returns nullopt for malformed lines.
std::optional<TraceRecord> parse_trace_line(std::string_view line);

}  // namespace scosens
