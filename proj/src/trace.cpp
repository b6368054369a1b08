#include "scosens/trace.hpp"

#include <array>
#include <charconv>

namespace scosens {

namespace {

constexpr std::array<std::pair<TraceKind, std::string_view>, 9> kKindNames{{
    {TraceKind::RadioOn, "radio_on"},
    {TraceKind::RadioOff, "radio_off"},
    {TraceKind::TxStart, "tx_start"},
    {TraceKind::TxEnd, "tx_end"},
    {TraceKind::RxOk, "rx_ok"},
    {TraceKind::RxCollision, "rx_collision"},
    {TraceKind::Beacon, "beacon"},
    {TraceKind::Ack, "ack"},
    {TraceKind::State, "state"},
}};

template <typename T>
std::optional<T> parse_unsigned(std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    return std::nullopt;
  }
  return value;
}

std::string_view next_token(std::string_view& rest) {
  while (!rest.empty() && rest.front() == ' ') {
    rest.remove_prefix(1);
  }
  const auto pos = rest.find(' ');
  std::string_view token = rest.substr(0, pos);
  rest.remove_prefix(pos == std::string_view::npos ? rest.size() : pos);
  return token;
}

}  // namespace

std::string_view to_string(TraceKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) {
      return name;
    }
  }
  return "?";
}

std::optional<TraceKind> trace_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) {
      return k;
    }
  }
  return std::nullopt;
}

Trace::Line::Line(Trace* trace, sim::SimTime t, NodeId node, TraceKind kind) : trace_(trace) {
  if (trace_ != nullptr) {
    buf_ << t << ' ' << node << ' ' << to_string(kind);
  }
}

Trace::Line::~Line() {
  if (trace_ != nullptr) {
    buf_ << '\n';
    *trace_->out_ << buf_.str();
    ++trace_->written_;
  }
}

std::optional<std::string> TraceRecord::get(std::string_view key) const {
  auto it = fields.find(key);
  if (it == fields.end()) {
    return std::nullopt;
  }
  return it->second;
}

std::optional<std::uint64_t> TraceRecord::get_u64(std::string_view key) const {
  auto it = fields.find(key);
  if (it == fields.end()) {
    return std::nullopt;
  }
  return parse_unsigned<std::uint64_t>(it->second);
}

std::optional<TraceRecord> parse_trace_line(std::string_view line) {
  if (!line.empty() && line.back() == '\n') {
    line.remove_suffix(1);
  }
  std::string_view rest = line;
  TraceRecord rec;
  auto time = parse_unsigned<sim::SimTime>(next_token(rest));
  auto node = parse_unsigned<NodeId>(next_token(rest));
  auto kind = trace_kind_from_string(next_token(rest));
  if (!time || !node || !kind) {
    return std::nullopt;
  }
  rec.time = *time;
  rec.node = *node;
  rec.kind = *kind;
  for (auto token = next_token(rest); !token.empty(); token = next_token(rest)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      return std::nullopt;
    }
    rec.fields.emplace(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
  }
  return rec;
}

}  // namespace scosens
