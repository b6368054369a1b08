#pragma once

// Deterministic discrete-event engine: integer microsecond clock, cancellable
// events with FIFO tie-breaking, hardware-timer quantization, seeded PRNG.

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace scosens::sim {

/// Microseconds since t=0.
using SimTime = std::uint64_t;
/// Length of an interval in microseconds.
using Duration = std::uint64_t;
using EventId = std::uint64_t;

/// Thrown when an event is scheduled before the current clock, or a
/// run_until target lies in the past.
class SchedulingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An event handler failed; the run is aborted. Carries the id and due time
/// of the event that was executing.
class SimulationFault : public std::runtime_error {
 public:
  SimulationFault(EventId id, SimTime at, const std::string& what);

  EventId event_id() const noexcept { return id_; }
  SimTime at() const noexcept { return at_; }

 private:
  EventId id_;
  SimTime at_;
};

/// Smallest multiple of `resolution` that is >= t.
/// Throws std::invalid_argument when resolution is zero.
SimTime quantize_up(SimTime t, Duration resolution);

/// A node's hardware timer: it can only fire on its own tick grid
/// `phase + k * resolution`. resolution <= 1 means exact timing.
struct TimerGrid {
  Duration resolution = 1;
  Duration phase = 0;

  /// First tick at or after t.
  SimTime next_tick(SimTime t) const;
};

class Simulator {
 public:
  using Handler = std::function<void()>;

  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const noexcept { return now_; }

  /// Enqueue `handler` to run at `due`. Events with equal due times run in
  /// insertion order.
  EventId schedule(SimTime due, Handler handler);
  EventId schedule_in(Duration delay, Handler handler) {
    return schedule(now_ + delay, std::move(handler));
  }

  /// True iff the event was pending. A cancelled event never runs.
  bool cancel(EventId id);
  bool is_pending(EventId id) const { return handlers_.count(id) != 0; }
  std::size_t pending_count() const noexcept { return handlers_.size(); }

  /// Execute every event due at or before t_end, then set the clock to t_end.
  /// Returns the number of handlers executed.
  std::size_t run_until(SimTime t_end);

  std::uint64_t executed_total() const noexcept { return executed_total_; }

  /// Called before each handler with (id, due). Used by tests to record the
  /// executed sequence.
  void set_observer(std::function<void(EventId, SimTime)> observer) {
    observer_ = std::move(observer);
  }

 private:
  struct Entry {
    SimTime due;
    EventId id;
    bool operator>(const Entry& other) const {
      return due != other.due ? due > other.due : id > other.id;
    }
  };

  SimTime now_ = 0;
  EventId next_id_ = 1;
  std::uint64_t executed_total_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue_;
  std::unordered_map<EventId, Handler> handlers_;
  std::function<void(EventId, SimTime)> observer_;
};

/// Seeded 64-bit generator (std::mt19937_64 core, which the C++ standard
/// fully specifies) with portable bounded draws. Each stream is keyed by
/// (scenario seed, node id, stream tag) through SplitMix64 so that adding
/// a node or a consumer never shifts another stream's draws.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed, std::uint64_t node = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, bound). bound must be > 0. Rejection sampling, so the
  /// sequence is identical across standard library implementations.
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform_unit();

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t node, std::uint64_t stream);

 private:
  // Only the raw engine output is used; <random> distributions are
  // implementation-defined and would break cross-toolchain determinism.
  std::mt19937_64 engine_;
};

}  // namespace scosens::sim
