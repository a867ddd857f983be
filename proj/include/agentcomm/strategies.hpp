#pragma once

#include <agentcomm/channel.hpp>
#include <agentcomm/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace agentcomm {

struct StrategyParams
{
  double event_threshold = 0.5;
  int bits_per_value = 4;
  double lambda = 0.3;
  int copies = 2;
};

enum class Budget { None, X1, X2 };

constexpr std::string_view to_string(Budget b) noexcept
{
  switch (b) {
    case Budget::None: return "none";
    case Budget::X1: return "1x";
    case Budget::X2: return "2x";
  }
  return "?";
}

inline std::optional<Budget> parse_budget(std::string_view s)
{
  if (s == "none") return Budget::None;
  if (s == "1x") return Budget::X1;
  if (s == "2x") return Budget::X2;
  return std::nullopt;
}

inline constexpr int kFloatBits = 32;

/*------------------------------------------------------------------------------------------------*/
// Compressed / event-triggered

/// 15-level quantization, round half away from zero. Idempotent.
inline Payload quantize4(const Payload& payload) noexcept
{
  Payload out;
  for (std::size_t i = 0; i < kCells; ++i) {
    out[i] = std::round(payload[i] * 15.0) / 15.0;
  }
  return out;
}

inline double l1_norm(const Payload& payload) noexcept
{
  double s = 0.0;
  for (double v : payload) {
    s += std::abs(v);
  }
  return s;
}

inline bool event_trigger(const Payload& payload, double threshold) noexcept
{
  return l1_norm(payload) > threshold;
}

/*------------------------------------------------------------------------------------------------*/
// Budget and accounting

/// Dimensions carried per message copy.
constexpr std::size_t message_dims(StrategyKind s, Budget b) noexcept
{
  if (s == StrategyKind::Resilient && b == Budget::X1) {
    return kCells / 2;
  }
  return kCells;
}

/// Under a 1x budget ResilientComm halves its payload so two copies fit the single-copy budget.
inline Payload enforce_budget(const Payload& payload, StrategyKind s, Budget b) noexcept
{
  const std::size_t dims = message_dims(s, b);
  if (dims == kCells) {
    return payload;
  }
  Payload out = payload;
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(dims), out.end(), 0.0);
  return out;
}

constexpr std::int64_t bits_per_message(StrategyKind s, Budget b = Budget::None,
                                        int bits_per_value = 4) noexcept
{
  const auto dims = static_cast<std::int64_t>(message_dims(s, b));
  switch (s) {
    case StrategyKind::NoComm: return 0;
    case StrategyKind::Compressed: return dims * bits_per_value;
    case StrategyKind::FullComm:
    case StrategyKind::EventTriggered:
    case StrategyKind::Resilient: return dims * kFloatBits;
  }
  return 0;
}

/// Bits for `msgs` transmitted messages; redundant copies count as messages.
constexpr std::int64_t bits_accounting(StrategyKind s, std::int64_t msgs, Budget b = Budget::None) noexcept
{
  return msgs * bits_per_message(s, b);
}

constexpr int copies_per_message(StrategyKind s, const StrategyParams& p) noexcept
{
  switch (s) {
    case StrategyKind::NoComm: return 0;
    case StrategyKind::Resilient: return p.copies;
    default: return 1;
  }
}

/// Sender-side transform. Empty when the strategy stays silent this step.
inline std::optional<Payload> outgoing_payload(StrategyKind s, const Payload& payload,
                                               const StrategyParams& p, Budget b)
{
  switch (s) {
    case StrategyKind::NoComm: return std::nullopt;
    case StrategyKind::FullComm: return payload;
    case StrategyKind::Compressed: return quantize4(payload);
    case StrategyKind::EventTriggered:
      if (!event_trigger(payload, p.event_threshold)) {
        return std::nullopt;
      }
      return payload;
    case StrategyKind::Resilient: return enforce_budget(payload, s, b);
  }
  return std::nullopt;
}

/*------------------------------------------------------------------------------------------------*/
// Receive-side selection

/// Deliveries from one sender ordered freshest first (newest timestamp, then lower copy index).
inline std::vector<const MessageEnvelope*> freshest_first(std::span<const Delivery> deliveries, int sender)
{
  std::vector<const MessageEnvelope*> out;
  for (const auto& d : deliveries) {
    if (d.envelope.sender == sender) {
      out.push_back(&d.envelope);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const MessageEnvelope* a, const MessageEnvelope* b) {
    if (a->send_step != b->send_step) {
      return a->send_step > b->send_step;
    }
    return a->copy < b->copy;
  });
  return out;
}

/*------------------------------------------------------------------------------------------------*/
// ResilientComm

struct NeighborSlot
{
  int id = 0;
  Payload buffer = zero_payload();
  int age = 0;
};

/// Per-agent buffer B and age counter T over a fixed neighbor set.
class ResilientState
{
public:
  ResilientState() = default;

  explicit ResilientState(std::span<const int> neighbor_ids)
  {
    for (int id : neighbor_ids) {
      slots_.push_back({id, zero_payload(), 0});
    }
  }

  std::size_t size() const noexcept { return slots_.size(); }
  std::span<const NeighborSlot> slots() const noexcept { return slots_; }

  NeighborSlot& slot(int id)
  {
    for (auto& s : slots_) {
      if (s.id == id) {
        return s;
      }
    }
    throw std::out_of_range("unknown neighbor");
  }

  const NeighborSlot& slot(int id) const { return const_cast<ResilientState*>(this)->slot(id); }

  std::vector<int> ages() const
  {
    std::vector<int> out;
    out.reserve(slots_.size());
    for (const auto& s : slots_) {
      out.push_back(s.age);
    }
    return out;
  }

  /// True when some neighbor's copy was accepted this step.
  bool any_fresh() const noexcept
  {
    return std::any_of(slots_.begin(), slots_.end(), [](const NeighborSlot& s) { return s.age == 0; });
  }

private:
  std::vector<NeighborSlot> slots_;
};

/// Copy 1 wins, else copy 2, else the age grows and the buffer keeps its last value.
/// Returns true when a copy was accepted.
inline bool resilient_receive(const std::optional<Payload>& copy1, const std::optional<Payload>& copy2,
                              ResilientState& state, int neighbor)
{
  NeighborSlot& s = state.slot(neighbor);
  if (copy1) {
    s.buffer = *copy1;
    s.age = 0;
    return true;
  }
  if (copy2) {
    s.buffer = *copy2;
    s.age = 0;
    return true;
  }
  s.age += 1;
  return false;
}

/// Softmax over -lambda * age.
inline std::vector<double> staleness_weights(std::span<const int> ages, double lambda)
{
  if (ages.empty()) {
    throw std::invalid_argument("staleness_weights needs at least one neighbor");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("lambda must be >= 0");
  }
  const int youngest = *std::min_element(ages.begin(), ages.end());
  std::vector<double> w(ages.size());
  double total = 0.0;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    w[i] = std::exp(-lambda * static_cast<double>(ages[i] - youngest));
    total += w[i];
  }
  for (double& x : w) {
    x /= total;
  }
  return w;
}

/// max(local, max_j w_j * B[j]).
inline Payload resilient_fuse(const ResilientState& state, std::span<const double> weights,
                              const Payload& local)
{
  Payload out = local;
  const auto slots = state.slots();
  for (std::size_t j = 0; j < slots.size(); ++j) {
    const double w = weights[j];
    const Payload& b = slots[j].buffer;
    for (std::size_t i = 0; i < kCells; ++i) {
      out[i] = std::max(out[i], w * b[i]);
    }
  }
  return out;
}

/// Cells of `payload` above half of its own maximum; empty for an all-zero payload.
inline std::vector<bool> relative_mask(const Payload& payload)
{
  std::vector<bool> mask(kCells, false);
  const double peak = *std::max_element(payload.begin(), payload.end());
  if (peak <= 0.0) {
    return mask;
  }
  for (std::size_t i = 0; i < kCells; ++i) {
    mask[i] = payload[i] > 0.5 * peak;
  }
  return mask;
}

} // namespace agentcomm
