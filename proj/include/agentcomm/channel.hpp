#pragma once

#include <agentcomm/rng.hpp>
#include <agentcomm/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace agentcomm {

/*------------------------------------------------------------------------------------------------*/
// Envelope

struct MessageEnvelope
{
  Payload payload{};
  int sender = 0;
  int receiver = 0;
  int send_step = 0;
  std::uint16_t timestamp = 0;
  /// Redundant copy index (0 for single-copy strategies).
  int copy = 0;
};

inline MessageEnvelope make_envelope(const Payload& payload, int sender, int receiver, int send_step,
                                     int copy = 0)
{
  MessageEnvelope env;
  env.payload = payload;
  env.sender = sender;
  env.receiver = receiver;
  env.send_step = send_step;
  env.timestamp = static_cast<std::uint16_t>(static_cast<std::uint32_t>(send_step) & 0xFFFFu);
  env.copy = copy;
  return env;
}

/// Receiver-side age estimate from the 16-bit header timestamp; wraps mod 65536.
constexpr int age_from_timestamp(int local_step, std::uint16_t timestamp) noexcept
{
  return static_cast<int>((static_cast<std::uint32_t>(local_step) - timestamp) & 0xFFFFu);
}

/*------------------------------------------------------------------------------------------------*/
// Impairments

struct Impairment
{
  Dimension dimension = Dimension::Latency;
  double severity = 0.0;
};

using Pipeline = std::vector<Impairment>;

/// Evenly spaced severities from 0 to the dimension's maximum.
inline std::vector<double> severity_grid(Dimension d, int levels = 11)
{
  if (levels < 2) {
    throw ConfigError("levels must be >= 2");
  }
  const double top = max_severity(d);
  std::vector<double> out(static_cast<std::size_t>(levels));
  for (int i = 0; i < levels; ++i) {
    out[static_cast<std::size_t>(i)] = top * static_cast<double>(i) / static_cast<double>(levels - 1);
  }
  return out;
}

inline void validate(const Pipeline& pipeline)
{
  if (pipeline.size() > 2) {
    throw ConfigError("a pipeline holds at most two impairments");
  }
  std::array<bool, kAllDimensions.size()> seen{};
  for (const auto& imp : pipeline) {
    auto slot = static_cast<std::size_t>(imp.dimension);
    if (seen[slot]) {
      throw ConfigError("duplicate impairment dimension in pipeline: " +
                        std::string(to_string(imp.dimension)));
    }
    seen[slot] = true;
    if (!(imp.severity >= 0.0) || imp.severity > max_severity(imp.dimension) + 1e-9) {
      std::ostringstream msg;
      msg << "severity " << imp.severity << " outside [0, " << max_severity(imp.dimension)
          << "] for " << to_string(imp.dimension);
      throw ConfigError(msg.str());
    }
  }
}

inline std::optional<double> severity_of(const Pipeline& pipeline, Dimension d) noexcept
{
  for (const auto& imp : pipeline) {
    if (imp.dimension == d) {
      return imp.severity;
    }
  }
  return std::nullopt;
}

/*------------------------------------------------------------------------------------------------*/
// Latency

inline int latency_steps(double sigma_ms, double step_ms)
{
  if (!(step_ms > 0.0)) {
    throw ConfigError("step_ms must be > 0");
  }
  if (sigma_ms < 0.0) {
    throw ConfigError("latency must be >= 0");
  }
  return static_cast<int>(std::floor(sigma_ms / step_ms));
}

/*------------------------------------------------------------------------------------------------*/
// Loss

/// One uniform draw; true means dropped.
inline bool bernoulli_drop(double p, SplitMix64& rng) noexcept
{
  return rng.uniform() < p;
}

enum class LossModelKind { Bernoulli, GilbertElliott };

enum class GeState { Good, Bad };

struct GeTransitions
{
  double p_good_to_bad = 0.0;
  double p_bad_to_good = 1.0;
};

/// Highest stationary loss reachable for burstiness `b` (p_good_to_bad == 1).
inline double ge_max_target(double b, double good_loss, double bad_loss) noexcept
{
  return good_loss + (bad_loss - good_loss) / (2.0 - b);
}

/// Transitions whose stationary loss equals `target_p` with Bad-state persistence `b`.
inline GeTransitions ge_calibrate(double target_p, double b, double good_loss, double bad_loss)
{
  if (!(good_loss < bad_loss)) {
    throw ConfigError("gilbert-elliott requires good_loss < bad_loss");
  }
  if (!(b >= 0.0 && b < 1.0)) {
    throw ConfigError("burstiness must lie in [0, 1)");
  }
  auto unreachable = [&] {
    std::ostringstream msg;
    msg << "unreachable gilbert-elliott target loss " << target_p << "; feasible range for b=" << b
        << " is [" << good_loss << ", " << ge_max_target(b, good_loss, bad_loss) << "]";
    return ConfigError(msg.str());
  };
  if (target_p < good_loss) {
    throw unreachable();
  }
  const double pi_bad = (target_p - good_loss) / (bad_loss - good_loss);
  if (pi_bad >= 1.0) {
    throw unreachable();
  }
  GeTransitions t;
  t.p_bad_to_good = 1.0 - b;
  t.p_good_to_bad = (1.0 - b) * pi_bad / (1.0 - pi_bad);
  if (t.p_good_to_bad > 1.0) {
    throw unreachable();
  }
  return t;
}

/// Advance the Markov state (first draw), then decide the drop in the new state (second draw).
inline std::pair<GeState, bool> ge_step(GeState state, const GeTransitions& t, double good_loss,
                                        double bad_loss, SplitMix64& rng) noexcept
{
  const double u = rng.uniform();
  if (state == GeState::Good) {
    if (u < t.p_good_to_bad) {
      state = GeState::Bad;
    }
  } else if (u < t.p_bad_to_good) {
    state = GeState::Good;
  }
  const double loss = state == GeState::Good ? good_loss : bad_loss;
  return {state, rng.uniform() < loss};
}

/*------------------------------------------------------------------------------------------------*/
// Content stages

/// Number of leading entries that survive a sigma% capacity cut (round half up).
inline std::size_t bandwidth_keep(double sigma_pct) noexcept
{
  const double keep = std::floor(static_cast<double>(kCells) * (1.0 - sigma_pct / 100.0) + 0.5);
  if (keep <= 0.0) {
    return 0;
  }
  return std::min(kCells, static_cast<std::size_t>(keep));
}

inline Payload truncate_bandwidth(const Payload& payload, double sigma_pct) noexcept
{
  Payload out = payload;
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(bandwidth_keep(sigma_pct)), out.end(), 0.0);
  return out;
}

/// Value written into a cell that conflicting evidence turns into a false positive.
inline constexpr double kConflictFalsePositive = 1.0;

/// Structured corruption of a transmitted copy. Each cell is hit with probability
/// sigma/100 (one draw per cell, index order): a nonzero cell is displaced to a uniformly
/// random cell (one more draw), a zero cell becomes a false positive. Collisions merge by max.
inline Payload apply_conflict(const Payload& payload, double sigma_pct, SplitMix64& rng)
{
  if (sigma_pct <= 0.0) {
    return payload;
  }
  const double p = sigma_pct / 100.0;
  Payload out = zero_payload();
  std::vector<std::pair<std::size_t, double>> moved;
  for (std::size_t i = 0; i < kCells; ++i) {
    const double v = payload[i];
    if (rng.uniform() < p) {
      if (v != 0.0) {
        moved.emplace_back(rng.index(kCells), v);
      } else {
        out[i] = std::max(out[i], kConflictFalsePositive);
      }
    } else {
      out[i] = std::max(out[i], v);
    }
  }
  for (auto [dest, v] : moved) {
    out[dest] = std::max(out[dest], v);
  }
  return out;
}

/// Stale-cache drift applied on every non-refresh delivery.
struct StaleDrift
{
  /// Probability that a cached nonzero entry jumps to a uniformly random cell.
  double relocate_prob = 1.0;
  /// Per zero cell probability of a spurious belief appearing.
  double ghost_rate = 0.01;
  /// Ghost value; below 1 so a relocated one-hot still wins argmax, above the 0.5 detection cut.
  double ghost_value = 0.6;
};

inline Payload drift_pass(const Payload& cached, const StaleDrift& drift, SplitMix64& rng)
{
  Payload out = zero_payload();
  for (std::size_t i = 0; i < kCells; ++i) {
    const double v = cached[i];
    if (v == 0.0) {
      continue;
    }
    if (rng.uniform() < drift.relocate_prob) {
      const std::size_t dest = rng.index(kCells);
      out[dest] = std::max(out[dest], v);
    } else {
      out[i] = std::max(out[i], v);
    }
  }
  for (std::size_t i = 0; i < kCells; ++i) {
    if (rng.uniform() < drift.ghost_rate && out[i] == 0.0) {
      out[i] = drift.ghost_value;
    }
  }
  return out;
}

/// Per-link receiver cache for the stale-memory stage.
struct StaleCache
{
  Payload cached = zero_payload();
  int last_refresh = -1;
  int last_step = -1;
};

/// Payload the receiver fuses under stale memory of `sigma_steps`. The cache accepts the
/// fresh payload only on steps divisible by sigma; other steps drift the cache once per step.
inline Payload stale_deliver(StaleCache& cache, const Payload& fresh, int sigma_steps, int step,
                             SplitMix64& rng, const StaleDrift& drift = {})
{
  if (sigma_steps <= 0) {
    return fresh;
  }
  if (cache.last_step == step) {
    return cache.cached;
  }
  cache.last_step = step;
  if (step % sigma_steps == 0) {
    cache.cached = fresh;
    cache.last_refresh = step;
  } else {
    cache.cached = drift_pass(cache.cached, drift, rng);
  }
  return cache.cached;
}

/// Uniform offset in {0..sigma}; one draw.
inline int async_offset(int sigma_steps, SplitMix64& rng) noexcept
{
  if (sigma_steps <= 0) {
    return 0;
  }
  return static_cast<int>(rng.index(static_cast<std::size_t>(sigma_steps) + 1));
}

/*------------------------------------------------------------------------------------------------*/
// Channel

struct ChannelParams
{
  LossModelKind loss_model = LossModelKind::Bernoulli;
  double burstiness = 0.0;
  double good_loss = 0.02;
  double bad_loss = 0.95;
  double step_ms = 40.0;
  StaleDrift drift{};
};

struct TransmitOutcome
{
  bool dropped = false;
  int due_step = 0;
  /// Payload after the sender-side stages (conflict, bandwidth).
  Payload payload{};
};

struct Delivery
{
  MessageEnvelope envelope;
};

struct DropRecord
{
  int step = 0;
  int sender = 0;
  int receiver = 0;
  int copy = 0;
  bool dropped = false;

  friend bool operator==(const DropRecord&, const DropRecord&) = default;
};

/// All per-episode channel state. Stage order is fixed:
/// Conflict -> Bandwidth -> Loss -> Latency -> Async at transmit, Stale at collect.
/// Each directed link owns an independent SplitMix64 stream.
class Channel
{
public:
  Channel(Pipeline pipeline, const ChannelParams& params, std::uint64_t seed)
    : pipeline_{std::move(pipeline)}, params_{params}
  {
    validate(pipeline_);
    if (!(params_.step_ms > 0.0)) {
      throw ConfigError("step_ms must be > 0");
    }
    conflict_ = severity_of(pipeline_, Dimension::Conflict).value_or(0.0);
    bandwidth_ = severity_of(pipeline_, Dimension::Bandwidth).value_or(0.0);
    loss_ = severity_of(pipeline_, Dimension::PacketLoss).value_or(0.0) / 100.0;
    latency_ = latency_steps(severity_of(pipeline_, Dimension::Latency).value_or(0.0), params_.step_ms);
    async_ = static_cast<int>(std::lround(severity_of(pipeline_, Dimension::Async).value_or(0.0)));
    stale_ = static_cast<int>(std::lround(severity_of(pipeline_, Dimension::Stale).value_or(0.0)));
    use_ge_ = params_.loss_model == LossModelKind::GilbertElliott && params_.burstiness > 0.0 && loss_ > 0.0;
    if (use_ge_) {
      ge_ = ge_calibrate(loss_, params_.burstiness, params_.good_loss, params_.bad_loss);
    }
    for (std::size_t l = 0; l < links_.size(); ++l) {
      links_[l].rng = SplitMix64{split_seed(seed, l)};
    }
  }

  const Pipeline& pipeline() const noexcept { return pipeline_; }

  /// Push one envelope through the sender-side stages and enqueue it if it survives.
  TransmitOutcome transmit(const MessageEnvelope& env)
  {
    Link& link = link_for(env.sender, env.receiver);
    TransmitOutcome out;
    out.payload = env.payload;
    if (conflict_ > 0.0) {
      out.payload = apply_conflict(out.payload, conflict_, link.rng);
    }
    if (bandwidth_ > 0.0) {
      out.payload = truncate_bandwidth(out.payload, bandwidth_);
    }
    if (loss_ > 0.0) {
      if (use_ge_) {
        auto [state, dropped] = ge_step(link.ge_state, ge_, params_.good_loss, params_.bad_loss, link.rng);
        link.ge_state = state;
        out.dropped = dropped;
      } else {
        out.dropped = bernoulli_drop(loss_, link.rng);
      }
    }
    out.due_step = env.send_step + latency_;
    if (!out.dropped && async_ > 0) {
      out.due_step += async_offset(async_, link.rng);
    }
    if (log_drops_) {
      drop_log_.push_back({env.send_step, env.sender, env.receiver, env.copy, out.dropped});
    }
    if (!out.dropped) {
      MessageEnvelope queued = env;
      queued.payload = out.payload;
      link.queue.push_back({out.due_step, std::move(queued)});
    }
    return out;
  }

  /// Messages due at `step` for `receiver`, senders in ascending id, FIFO within a link,
  /// after the receiver-side stale stage.
  std::vector<Delivery> collect(int receiver, int step)
  {
    std::vector<Delivery> out;
    for (int sender = 0; sender < kNodes; ++sender) {
      if (sender == receiver) {
        continue;
      }
      Link& link = link_for(sender, receiver);
      auto& q = link.queue;
      auto it = q.begin();
      while (it != q.end()) {
        if (it->due_step == step) {
          MessageEnvelope env = std::move(it->envelope);
          if (stale_ > 0) {
            env.payload = stale_deliver(link.stale, env.payload, stale_, step, link.rng, params_.drift);
          }
          out.push_back({std::move(env)});
          it = q.erase(it);
        } else if (it->due_step < step) {
          it = q.erase(it);
        } else {
          ++it;
        }
      }
    }
    return out;
  }

  void enable_drop_log(bool on = true) noexcept { log_drops_ = on; }
  const std::vector<DropRecord>& drop_log() const noexcept { return drop_log_; }

private:
  struct Pending
  {
    int due_step;
    MessageEnvelope envelope;
  };

  struct Link
  {
    SplitMix64 rng{};
    GeState ge_state = GeState::Good;
    StaleCache stale{};
    std::vector<Pending> queue;
  };

  Link& link_for(int sender, int receiver)
  {
    if (sender < 0 || sender >= kNodes || receiver < 0 || receiver >= kNodes || sender == receiver) {
      throw std::out_of_range("invalid link");
    }
    return links_[static_cast<std::size_t>(sender * kNodes + receiver)];
  }

  Pipeline pipeline_;
  ChannelParams params_;
  double conflict_ = 0.0;
  double bandwidth_ = 0.0;
  double loss_ = 0.0;
  int latency_ = 0;
  int async_ = 0;
  int stale_ = 0;
  bool use_ge_ = false;
  GeTransitions ge_{};
  std::array<Link, kNodes * kNodes> links_{};
  bool log_drops_ = false;
  std::vector<DropRecord> drop_log_;
};

} // namespace agentcomm
