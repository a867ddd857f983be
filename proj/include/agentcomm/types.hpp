#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace agentcomm {

inline constexpr int kGridSize = 20;
inline constexpr std::size_t kCells = kGridSize * kGridSize;
inline constexpr int kAgents = 4;
/// Node id of the NAV/SEARCH coordinator; agents are 0..kAgents-1.
inline constexpr int kCoordinator = kAgents;
inline constexpr int kNodes = kAgents + 1;

/// Flattened 20x20 grid message, row-major, entries in [0, 1].
using Payload = std::array<double, kCells>;

inline Payload zero_payload() noexcept
{
  Payload p{};
  p.fill(0.0);
  return p;
}

inline bool is_zero(const Payload& p) noexcept
{
  for (double v : p) {
    if (v != 0.0) {
      return false;
    }
  }
  return true;
}

struct GridPos
{
  int row = 0;
  int col = 0;

  constexpr std::size_t flat() const noexcept
  {
    return static_cast<std::size_t>(row * kGridSize + col);
  }

  static constexpr GridPos from_flat(std::size_t i) noexcept
  {
    return {static_cast<int>(i) / kGridSize, static_cast<int>(i) % kGridSize};
  }

  constexpr bool on_grid() const noexcept
  {
    return row >= 0 && row < kGridSize && col >= 0 && col < kGridSize;
  }

  friend constexpr bool operator==(const GridPos&, const GridPos&) = default;
};

constexpr int manhattan(GridPos a, GridPos b) noexcept
{
  int dr = a.row - b.row;
  int dc = a.col - b.col;
  return (dr < 0 ? -dr : dr) + (dc < 0 ? -dc : dc);
}

inline Payload one_hot(GridPos p) noexcept
{
  Payload out = zero_payload();
  out[p.flat()] = 1.0;
  return out;
}

/// Invalid configuration; maps to CLI exit code 1.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure; maps to CLI exit code 2.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class Dimension { Latency, PacketLoss, Bandwidth, Async, Stale, Conflict };

inline constexpr std::array<Dimension, 6> kAllDimensions{
  Dimension::Latency, Dimension::PacketLoss, Dimension::Bandwidth,
  Dimension::Async,   Dimension::Stale,      Dimension::Conflict};

constexpr std::string_view to_string(Dimension d) noexcept
{
  switch (d) {
    case Dimension::Latency: return "latency";
    case Dimension::PacketLoss: return "packet_loss";
    case Dimension::Bandwidth: return "bandwidth";
    case Dimension::Async: return "async";
    case Dimension::Stale: return "stale";
    case Dimension::Conflict: return "conflict";
  }
  return "?";
}

/// Upper end of the severity range: ms, %, %, steps, steps, %.
constexpr double max_severity(Dimension d) noexcept
{
  switch (d) {
    case Dimension::Latency: return 500.0;
    case Dimension::PacketLoss: return 80.0;
    case Dimension::Bandwidth: return 100.0;
    case Dimension::Async: return 10.0;
    case Dimension::Stale: return 20.0;
    case Dimension::Conflict: return 40.0;
  }
  return 0.0;
}

enum class TaskKind { CP, NAV, SEARCH };

inline constexpr std::array<TaskKind, 3> kAllTasks{TaskKind::CP, TaskKind::NAV, TaskKind::SEARCH};

constexpr std::string_view to_string(TaskKind t) noexcept
{
  switch (t) {
    case TaskKind::CP: return "cp";
    case TaskKind::NAV: return "nav";
    case TaskKind::SEARCH: return "search";
  }
  return "?";
}

enum class StrategyKind { NoComm, FullComm, Compressed, EventTriggered, Resilient };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{
  StrategyKind::NoComm, StrategyKind::FullComm, StrategyKind::Compressed,
  StrategyKind::EventTriggered, StrategyKind::Resilient};

constexpr std::string_view to_string(StrategyKind s) noexcept
{
  switch (s) {
    case StrategyKind::NoComm: return "no_comm";
    case StrategyKind::FullComm: return "full_comm";
    case StrategyKind::Compressed: return "compressed";
    case StrategyKind::EventTriggered: return "event_triggered";
    case StrategyKind::Resilient: return "resilient";
  }
  return "?";
}

namespace detail {

inline std::string normalize_name(std::string_view s)
{
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '-') {
      out.push_back('_');
    } else if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      out.push_back(c);
    }
  }
  return out;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view name, const std::array<Enum, N>& all)
{
  const std::string key = normalize_name(name);
  for (Enum e : all) {
    if (to_string(e) == key) {
      return e;
    }
  }
  return std::nullopt;
}

} // namespace detail

inline std::optional<Dimension> parse_dimension(std::string_view s)
{
  return detail::lookup(s, kAllDimensions);
}

inline std::optional<TaskKind> parse_task(std::string_view s)
{
  return detail::lookup(s, kAllTasks);
}

inline std::optional<StrategyKind> parse_strategy(std::string_view s)
{
  return detail::lookup(s, kAllStrategies);
}

} // namespace agentcomm
