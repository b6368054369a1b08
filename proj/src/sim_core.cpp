#include "scosens/sim_core.hpp"

#include <sstream>

namespace scosens::sim {

namespace {

std::string fault_message(EventId id, SimTime at, const std::string& what) {
  std::ostringstream os;
  os << "event " << id << " at t=" << at << "us failed: " << what;
  return os.str();
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

SimulationFault::SimulationFault(EventId id, SimTime at, const std::string& what)
    : std::runtime_error(fault_message(id, at, what)), id_(id), at_(at) {}

SimTime quantize_up(SimTime t, Duration resolution) {
  if (resolution == 0) {
    throw std::invalid_argument("quantize_up: resolution must be > 0");
  }
  const SimTime rem = t % resolution;
  return rem == 0 ? t : t + (resolution - rem);
}

SimTime TimerGrid::next_tick(SimTime t) const {
  if (resolution <= 1) {
    return t;
  }
  if (t <= phase) {
    return phase;
  }
  return phase + quantize_up(t - phase, resolution);
}

EventId Simulator::schedule(SimTime due, Handler handler) {
  if (due < now_) {
    std::ostringstream os;
    os << "cannot schedule at t=" << due << "us: clock is already at " << now_ << "us";
    throw SchedulingError(os.str());
  }
  const EventId id = next_id_++;
  queue_.push(Entry{due, id});
  handlers_.emplace(id, std::move(handler));
  return id;
}

bool Simulator::cancel(EventId id) { return handlers_.erase(id) != 0; }

std::size_t Simulator::run_until(SimTime t_end) {
  if (t_end < now_) {
    std::ostringstream os;
    os << "run_until(" << t_end << ") is before the current clock " << now_;
    throw SchedulingError(os.str());
  }
  std::size_t executed = 0;
  while (!queue_.empty() && queue_.top().due <= t_end) {
    const Entry entry = queue_.top();
    queue_.pop();
    auto it = handlers_.find(entry.id);
    if (it == handlers_.end()) {
      continue;  // cancelled
    }
    Handler handler = std::move(it->second);
    handlers_.erase(it);
    now_ = entry.due;
    if (observer_) {
      observer_(entry.id, entry.due);
    }
    try {
      handler();
    } catch (const SimulationFault&) {
      throw;
    } catch (const std::exception& e) {
      throw SimulationFault(entry.id, entry.due, e.what());
    }
    ++executed;
    ++executed_total_;
  }
  now_ = t_end;
  return executed;
}

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t node, std::uint64_t stream)
    : engine_(mix(seed, node, stream)) {}

std::uint64_t RandomSource::mix(std::uint64_t seed, std::uint64_t node, std::uint64_t stream) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ (node * 0xD1B54A32D192ED03ULL);
  h = splitmix64(state);
  state = h ^ (stream * 0xABC98388FB8FAC03ULL);
  return splitmix64(state);
}

std::uint64_t RandomSource::next_u64() { return engine_(); }

std::uint64_t RandomSource::uniform_below(std::uint64_t bound) {
  if (bound == 0) {
    throw std::invalid_argument("uniform_below: bound must be > 0");
  }
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r > limit);
  return r % bound;
}

double RandomSource::uniform_unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

}  // namespace scosens::sim
