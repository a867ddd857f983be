#pragma once

#include <agentcomm/channel.hpp>
#include <agentcomm/rng.hpp>
#include <agentcomm/strategies.hpp>
#include <agentcomm/types.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agentcomm {

struct EpisodeConfig
{
  TaskKind task = TaskKind::NAV;
  int steps = 50;
  int objects = 30;
  int waypoints_per_agent = 3;
  int targets = 20;
  int zones_per_agent = 4;
  /// CP local sensing, realized once per episode.
  double detect_prob = 0.97;
  double false_positive_rate = 0.0015;
};

inline EpisodeConfig default_episode_config(TaskKind task)
{
  EpisodeConfig c;
  c.task = task;
  c.steps = task == TaskKind::CP ? 20 : 50;
  return c;
}

/// Strategy, channel and budget for one episode.
struct EpisodeSetup
{
  StrategyKind strategy = StrategyKind::FullComm;
  StrategyParams params{};
  Budget budget = Budget::None;
  Pipeline pipeline{};
  ChannelParams channel{};
};

/// The environment stream draws layouts and agent motion; the channel stream feeds every link.
struct EpisodeSeeds
{
  std::uint64_t environment = 0;
  std::uint64_t channel = 0;
};

inline EpisodeSeeds seeds_from(std::uint64_t seed) noexcept
{
  return {split_seed(seed, 0), split_seed(seed, 1)};
}

struct EpisodeResult
{
  double score = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::int64_t bits_sent = 0;
  std::int64_t msgs_sent = 0;
  int steps = 0;
  std::string failure_label = "none";
};

/// Optional instrumentation for tests.
struct EpisodeTrace
{
  std::vector<DropRecord> drops;
  /// Per step, per agent, the decoded target (flat index) or -1.
  std::vector<std::array<int, kAgents>> decoded;
  /// Per step binarized CP team output.
  std::vector<std::vector<bool>> team_masks;
};

/*------------------------------------------------------------------------------------------------*/
// Grid helpers

struct DetectionScores
{
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and their harmonic mean. Two empty sets score 1.
inline DetectionScores detection_scores(const std::vector<bool>& pred, const std::vector<bool>& truth)
{
  std::size_t tp = 0;
  std::size_t npred = 0;
  std::size_t ntruth = 0;
  const std::size_t n = std::min(pred.size(), truth.size());
  for (std::size_t i = 0; i < n; ++i) {
    npred += pred[i] ? 1 : 0;
    ntruth += truth[i] ? 1 : 0;
    tp += (pred[i] && truth[i]) ? 1 : 0;
  }
  if (npred == 0 && ntruth == 0) {
    return {1.0, 1.0, 1.0};
  }
  DetectionScores s;
  s.precision = npred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(npred);
  s.recall = ntruth == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(ntruth);
  s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

inline std::vector<bool> to_mask(std::span<const GridPos> cells)
{
  std::vector<bool> mask(kCells, false);
  for (auto p : cells) {
    mask[p.flat()] = true;
  }
  return mask;
}

inline double f1_score(std::span<const GridPos> pred, std::span<const GridPos> truth)
{
  return detection_scores(to_mask(pred), to_mask(truth)).f1;
}

/// Row-major argmax, lowest index on ties; none for an all-zero payload.
inline std::optional<GridPos> decode_waypoint(const Payload& payload) noexcept
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < kCells; ++i) {
    if (payload[i] > payload[best]) {
      best = i;
    }
  }
  if (!(payload[best] > 0.0)) {
    return std::nullopt;
  }
  return GridPos::from_flat(best);
}

/// One cell toward `target`, closing the row gap first.
constexpr GridPos greedy_step(GridPos pos, GridPos target) noexcept
{
  if (pos.row != target.row) {
    pos.row += target.row > pos.row ? 1 : -1;
  } else if (pos.col != target.col) {
    pos.col += target.col > pos.col ? 1 : -1;
  }
  return pos;
}

/// Uniform over the in-grid subset of {stay, up, down, left, right}; one draw.
inline GridPos random_walk_step(GridPos pos, SplitMix64& rng) noexcept
{
  static constexpr std::array<std::array<int, 2>, 5> kMoves{{{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  std::array<GridPos, 5> options{};
  std::size_t n = 0;
  for (auto [dr, dc] : kMoves) {
    GridPos next{pos.row + dr, pos.col + dc};
    if (next.on_grid()) {
      options[n++] = next;
    }
  }
  return options[rng.index(n)];
}

/// `count` distinct cells by partial Fisher-Yates.
inline std::vector<std::size_t> sample_cells(std::size_t count, SplitMix64& rng)
{
  std::vector<std::size_t> cells(kCells);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  count = std::min(count, kCells);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(kCells - i);
    std::swap(cells[i], cells[j]);
  }
  cells.resize(count);
  return cells;
}

namespace detail {

inline std::vector<bool> binarize(const Payload& p, double threshold = 0.5)
{
  std::vector<bool> mask(kCells, false);
  for (std::size_t i = 0; i < kCells; ++i) {
    mask[i] = p[i] > threshold;
  }
  return mask;
}

inline void merge_mask(std::vector<bool>& into, const std::vector<bool>& from)
{
  for (std::size_t i = 0; i < kCells; ++i) {
    if (from[i]) {
      into[i] = true;
    }
  }
}

inline void send(Channel& channel, EpisodeResult& result, const EpisodeSetup& setup, const Payload& payload,
                 int sender, int receiver, int step)
{
  const int copies = copies_per_message(setup.strategy, setup.params);
  for (int c = 0; c < copies; ++c) {
    channel.transmit(make_envelope(payload, sender, receiver, step, c));
    result.msgs_sent += 1;
    result.bits_sent += bits_per_message(setup.strategy, setup.budget, setup.params.bits_per_value);
  }
}

inline std::vector<int> other_agents(int self)
{
  std::vector<int> out;
  for (int a = 0; a < kAgents; ++a) {
    if (a != self) {
      out.push_back(a);
    }
  }
  return out;
}

/// Accept this step's copies from `sender` into a ResilientComm buffer.
inline bool resilient_accept(ResilientState& state, std::span<const Delivery> deliveries, int sender)
{
  const auto ordered = freshest_first(deliveries, sender);
  std::optional<Payload> c1;
  std::optional<Payload> c2;
  if (!ordered.empty()) {
    c1 = ordered[0]->payload;
  }
  if (ordered.size() > 1) {
    c2 = ordered[1]->payload;
  }
  return resilient_receive(c1, c2, state, sender);
}

} // namespace detail

/*------------------------------------------------------------------------------------------------*/
// Cooperative perception

/// Top-left corner of agent `a`'s 10x10 quadrant.
constexpr GridPos quadrant_origin(int agent) noexcept
{
  return {(agent / 2) * (kGridSize / 2), (agent % 2) * (kGridSize / 2)};
}

inline EpisodeResult cp_run_episode(const EpisodeSetup& setup, const EpisodeConfig& config,
                                    const EpisodeSeeds& seeds, EpisodeTrace* trace = nullptr)
{
  SplitMix64 env{seeds.environment};
  Channel channel{setup.pipeline, setup.channel, seeds.channel};
  if (trace != nullptr) {
    channel.enable_drop_log();
  }

  std::vector<bool> truth(kCells, false);
  for (auto cell : sample_cells(static_cast<std::size_t>(config.objects), env)) {
    truth[cell] = true;
  }

  std::array<Payload, kAgents> local{};
  for (int a = 0; a < kAgents; ++a) {
    local[a] = zero_payload();
    const GridPos origin = quadrant_origin(a);
    for (int r = 0; r < kGridSize / 2; ++r) {
      for (int c = 0; c < kGridSize / 2; ++c) {
        const std::size_t cell = GridPos{origin.row + r, origin.col + c}.flat();
        const double u = env.uniform();
        const bool seen = truth[cell] ? u < config.detect_prob : u < config.false_positive_rate;
        local[a][cell] = seen ? 1.0 : 0.0;
      }
    }
  }

  std::array<ResilientState, kAgents> resilient;
  for (int a = 0; a < kAgents; ++a) {
    const auto others = detail::other_agents(a);
    resilient[a] = ResilientState{others};
  }

  EpisodeResult result;
  result.steps = config.steps;
  double f1_sum = 0.0;
  double p_sum = 0.0;
  double r_sum = 0.0;

  for (int t = 0; t < config.steps; ++t) {
    for (int s = 0; s < kAgents; ++s) {
      const auto out = outgoing_payload(setup.strategy, local[s], setup.params, setup.budget);
      if (!out) {
        continue;
      }
      for (int r = 0; r < kAgents; ++r) {
        if (r != s) {
          detail::send(channel, result, setup, *out, s, r, t);
        }
      }
    }

    std::vector<bool> team(kCells, false);
    for (int a = 0; a < kAgents; ++a) {
      const auto deliveries = channel.collect(a, t);
      detail::merge_mask(team, detail::binarize(local[a]));
      if (setup.strategy == StrategyKind::NoComm) {
        continue;
      }
      if (setup.strategy == StrategyKind::Resilient) {
        for (int j : detail::other_agents(a)) {
          detail::resilient_accept(resilient[a], deliveries, j);
        }
        // Buffers are binarized against their own peak before any weighting, so the
        // team output does not depend on lambda.
        for (const auto& slot : resilient[a].slots()) {
          detail::merge_mask(team, relative_mask(slot.buffer));
        }
        continue;
      }
      Payload knowledge = local[a];
      for (int j : detail::other_agents(a)) {
        const auto ordered = freshest_first(deliveries, j);
        if (ordered.empty()) {
          continue;
        }
        const Payload& msg = ordered.front()->payload;
        for (std::size_t i = 0; i < kCells; ++i) {
          knowledge[i] = std::max(knowledge[i], msg[i]);
        }
      }
      detail::merge_mask(team, detail::binarize(knowledge));
    }

    const auto scores = detection_scores(team, truth);
    f1_sum += scores.f1;
    p_sum += scores.precision;
    r_sum += scores.recall;
    if (trace != nullptr) {
      trace->team_masks.push_back(team);
    }
  }

  const double n = static_cast<double>(std::max(1, config.steps));
  result.score = f1_sum / n;
  result.precision = p_sum / n;
  result.recall = r_sum / n;
  if (trace != nullptr) {
    trace->drops = channel.drop_log();
  }
  return result;
}

/*------------------------------------------------------------------------------------------------*/
// Waypoint following (NAV and SEARCH share the coordinator loop)

namespace detail {

struct Follower
{
  GridPos pos{};
  std::vector<GridPos> waypoints;
  std::size_t next = 0;
  bool decoded_once = false;
  SplitMix64 motion{};
};

/// One coordinator-driven episode. `on_move` runs after every agent move and at the start.
template <typename OnMove>
void follow_waypoints(std::vector<Follower>& agents, const EpisodeSetup& setup, int steps, Channel& channel,
                      EpisodeResult& result, EpisodeTrace* trace, OnMove&& on_move)
{
  std::vector<ResilientState> resilient;
  const std::array<int, 1> coordinator{kCoordinator};
  for (std::size_t a = 0; a < agents.size(); ++a) {
    resilient.emplace_back(coordinator);
  }
  for (std::size_t a = 0; a < agents.size(); ++a) {
    on_move(static_cast<int>(a), agents[a].pos);
  }

  for (int t = 0; t < steps; ++t) {
    for (std::size_t a = 0; a < agents.size(); ++a) {
      const Follower& f = agents[a];
      if (f.next >= f.waypoints.size()) {
        continue;
      }
      const auto out = outgoing_payload(setup.strategy, one_hot(f.waypoints[f.next]), setup.params, setup.budget);
      if (out) {
        send(channel, result, setup, *out, kCoordinator, static_cast<int>(a), t);
      }
    }

    std::array<int, kAgents> decoded_now{-1, -1, -1, -1};
    for (std::size_t a = 0; a < agents.size(); ++a) {
      Follower& f = agents[a];
      const auto deliveries = channel.collect(static_cast<int>(a), t);

      bool contact = false;
      Payload knowledge = zero_payload();
      if (setup.strategy == StrategyKind::Resilient) {
        resilient_accept(resilient[a], deliveries, kCoordinator);
        contact = resilient[a].any_fresh();
        const auto ages = resilient[a].ages();
        const auto w = staleness_weights(ages, setup.params.lambda);
        knowledge = resilient_fuse(resilient[a], w, knowledge);
      } else if (setup.strategy != StrategyKind::NoComm) {
        const auto ordered = freshest_first(deliveries, kCoordinator);
        if (!ordered.empty()) {
          contact = true;
          knowledge = ordered.front()->payload;
        }
      }

      if (!contact) {
        f.pos = random_walk_step(f.pos, f.motion);
      } else if (const auto target = decode_waypoint(knowledge)) {
        f.pos = greedy_step(f.pos, *target);
        f.decoded_once = true;
        if (static_cast<std::size_t>(a) < decoded_now.size()) {
          decoded_now[a] = static_cast<int>(target->flat());
        }
      } else if (!f.decoded_once) {
        f.pos = random_walk_step(f.pos, f.motion);
      }

      on_move(static_cast<int>(a), f.pos);
      if (f.next < f.waypoints.size() && manhattan(f.pos, f.waypoints[f.next]) <= 1) {
        f.next += 1;
      }
    }
    if (trace != nullptr) {
      trace->decoded.push_back(decoded_now);
    }
  }
  if (trace != nullptr) {
    trace->drops = channel.drop_log();
  }
}

inline SplitMix64 motion_stream(std::uint64_t env_seed, int agent)
{
  return SplitMix64{split_seed(env_seed, 100 + static_cast<std::uint64_t>(agent))};
}

} // namespace detail

inline EpisodeResult nav_run_episode(const EpisodeSetup& setup, const EpisodeConfig& config,
                                     const EpisodeSeeds& seeds, EpisodeTrace* trace = nullptr)
{
  SplitMix64 env{seeds.environment};
  Channel channel{setup.pipeline, setup.channel, seeds.channel};
  if (trace != nullptr) {
    channel.enable_drop_log();
  }

  std::vector<detail::Follower> agents(kAgents);
  for (int a = 0; a < kAgents; ++a) {
    agents[a].pos = GridPos::from_flat(env.index(kCells));
    agents[a].motion = detail::motion_stream(seeds.environment, a);
  }
  for (int a = 0; a < kAgents; ++a) {
    for (int w = 0; w < config.waypoints_per_agent; ++w) {
      agents[a].waypoints.push_back(GridPos::from_flat(env.index(kCells)));
    }
  }

  EpisodeResult result;
  result.steps = config.steps;
  detail::follow_waypoints(agents, setup, config.steps, channel, result, trace, [](int, GridPos) {});

  std::size_t reached = 0;
  std::size_t total = 0;
  for (const auto& f : agents) {
    reached += f.next;
    total += f.waypoints.size();
  }
  result.score = total == 0 ? 0.0 : 100.0 * static_cast<double>(reached) / static_cast<double>(total);
  return result;
}

inline constexpr int kZoneSize = 5;
inline constexpr int kZonesPerSide = kGridSize / kZoneSize;

constexpr GridPos zone_center(int zone) noexcept
{
  return {(zone / kZonesPerSide) * kZoneSize + kZoneSize / 2, (zone % kZonesPerSide) * kZoneSize + kZoneSize / 2};
}

inline EpisodeResult search_run_episode(const EpisodeSetup& setup, const EpisodeConfig& config,
                                        const EpisodeSeeds& seeds, EpisodeTrace* trace = nullptr)
{
  SplitMix64 env{seeds.environment};
  Channel channel{setup.pipeline, setup.channel, seeds.channel};
  if (trace != nullptr) {
    channel.enable_drop_log();
  }

  std::vector<detail::Follower> agents(kAgents);
  for (int a = 0; a < kAgents; ++a) {
    agents[a].pos = GridPos::from_flat(env.index(kCells));
    agents[a].motion = detail::motion_stream(seeds.environment, a);
  }

  std::vector<bool> hidden(kCells, false);
  const auto targets = sample_cells(static_cast<std::size_t>(config.targets), env);
  for (auto cell : targets) {
    hidden[cell] = true;
  }

  constexpr int zones = kZonesPerSide * kZonesPerSide;
  std::vector<int> order(zones);
  std::iota(order.begin(), order.end(), 0);
  for (int i = zones - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[env.index(static_cast<std::size_t>(i) + 1)]);
  }
  for (int m = 0; m < config.zones_per_agent; ++m) {
    for (int a = 0; a < kAgents; ++a) {
      const auto slot = static_cast<std::size_t>((m * kAgents + a) % zones);
      agents[a].waypoints.push_back(zone_center(order[slot]));
    }
  }

  EpisodeResult result;
  result.steps = config.steps;
  std::vector<bool> found(kCells, false);
  std::size_t found_count = 0;
  detail::follow_waypoints(agents, setup, config.steps, channel, result, trace, [&](int, GridPos p) {
    const std::size_t cell = p.flat();
    if (hidden[cell] && !found[cell]) {
      found[cell] = true;
      ++found_count;
    }
  });

  result.score = targets.empty() ? 0.0 : 100.0 * static_cast<double>(found_count) / static_cast<double>(targets.size());
  return result;
}

inline EpisodeResult run_episode(const EpisodeSetup& setup, const EpisodeConfig& config, const EpisodeSeeds& seeds,
                                 EpisodeTrace* trace = nullptr)
{
  switch (config.task) {
    case TaskKind::CP: return cp_run_episode(setup, config, seeds, trace);
    case TaskKind::NAV: return nav_run_episode(setup, config, seeds, trace);
    case TaskKind::SEARCH: return search_run_episode(setup, config, seeds, trace);
  }
  return {};
}

} // namespace agentcomm
