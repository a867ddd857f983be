#pragma once

#include <agentcomm/channel.hpp>
#include <agentcomm/metrics.hpp>
#include <agentcomm/rng.hpp>
#include <agentcomm/strategies.hpp>
#include <agentcomm/tasks.hpp>
#include <agentcomm/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace agentcomm {

inline constexpr const char* kVersion = "1.0.0";

using DimensionPair = std::pair<Dimension, Dimension>;

struct BenchmarkConfig
{
  std::vector<StrategyKind> methods{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<TaskKind> tasks{kAllTasks.begin(), kAllTasks.end()};
  std::vector<Dimension> impairments{kAllDimensions.begin(), kAllDimensions.end()};
  /// When non-empty, replaces `impairments` with a two-dimensional grid per pair.
  std::vector<DimensionPair> joint;
  int levels = 11;
  int episodes = 30;
  std::uint64_t seed_base = 42;
  LossModelKind loss_model = LossModelKind::Bernoulli;
  double burstiness = 0.9;
  std::vector<double> lambdas{0.3};
  Budget budget = Budget::None;
  int threads = 1;
  std::string out = "out";
};

inline std::string_view to_string(LossModelKind m) noexcept
{
  return m == LossModelKind::Bernoulli ? "bernoulli" : "gilbert_elliott";
}

inline std::optional<LossModelKind> parse_loss_model(std::string_view s)
{
  const std::string key = detail::normalize_name(s);
  if (key == "bernoulli") return LossModelKind::Bernoulli;
  if (key == "gilbert_elliott" || key == "ge") return LossModelKind::GilbertElliott;
  return std::nullopt;
}

/// Throws ConfigError naming the first violated invariant.
inline void validate(const BenchmarkConfig& c)
{
  if (c.methods.empty()) throw ConfigError("no methods selected");
  if (c.tasks.empty()) throw ConfigError("no tasks selected");
  if (c.impairments.empty() && c.joint.empty()) throw ConfigError("no impairments selected");
  if (c.episodes < 1) throw ConfigError("episodes must be >= 1");
  if (c.levels < 2) throw ConfigError("levels must be >= 2");
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.lambdas.empty()) throw ConfigError("lambda list is empty");
  for (double l : c.lambdas) {
    if (!(l >= 0.0)) throw ConfigError("lambda must be >= 0");
  }
  if (!(c.burstiness >= 0.0 && c.burstiness < 1.0)) throw ConfigError("burstiness must be in [0, 1)");
  for (const auto& [a, b] : c.joint) {
    if (a == b) throw ConfigError("joint pair repeats " + std::string(to_string(a)));
  }
}

/*------------------------------------------------------------------------------------------------*/
// Config file and overrides

namespace detail {

template <typename Enum, typename Parse>
std::vector<Enum> parse_list(const std::vector<std::string>& names, Parse parse, const char* what)
{
  std::vector<Enum> out;
  for (const auto& n : names) {
    auto v = parse(n);
    if (!v) throw ConfigError(std::string("unknown ") + what + ": " + n);
    if (std::find(out.begin(), out.end(), *v) == out.end()) out.push_back(*v);
  }
  return out;
}

} // namespace detail

inline std::vector<StrategyKind> parse_methods(const std::vector<std::string>& names)
{
  return detail::parse_list<StrategyKind>(names, parse_strategy, "method");
}

inline std::vector<TaskKind> parse_tasks(const std::vector<std::string>& names)
{
  return detail::parse_list<TaskKind>(names, parse_task, "task");
}

inline std::vector<Dimension> parse_impairments(const std::vector<std::string>& names)
{
  return detail::parse_list<Dimension>(names, parse_dimension, "impairment");
}

/// "latency,packet_loss" -> pair.
inline DimensionPair parse_joint(const std::string& text)
{
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("joint expects A,B: " + text);
  const auto dims = parse_impairments({text.substr(0, comma), text.substr(comma + 1)});
  if (dims.size() != 2) throw ConfigError("joint pair repeats a dimension: " + text);
  return {dims[0], dims[1]};
}

inline Budget parse_budget_or_throw(const std::string& s)
{
  auto b = parse_budget(detail::normalize_name(s));
  if (!b) throw ConfigError("unknown budget: " + s);
  return *b;
}

inline LossModelKind parse_loss_model_or_throw(const std::string& s)
{
  auto m = parse_loss_model(s);
  if (!m) throw ConfigError("unknown channel model: " + s);
  return *m;
}

/// Reads the documented keys; unknown keys are a configuration error.
inline BenchmarkConfig config_from_json(const nlohmann::json& j)
{
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  BenchmarkConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "methods") c.methods = parse_methods(v.get<std::vector<std::string>>());
      else if (key == "tasks") c.tasks = parse_tasks(v.get<std::vector<std::string>>());
      else if (key == "impairments") c.impairments = parse_impairments(v.get<std::vector<std::string>>());
      else if (key == "joint") {
        c.joint.clear();
        for (const auto& p : v) {
          const auto names = p.get<std::vector<std::string>>();
          if (names.size() != 2) throw ConfigError("joint entries need two names");
          c.joint.push_back(parse_joint(names[0] + "," + names[1]));
        }
      }
      else if (key == "levels") c.levels = v.get<int>();
      else if (key == "episodes") c.episodes = v.get<int>();
      else if (key == "seed_base") c.seed_base = v.get<std::uint64_t>();
      else if (key == "channel_model") c.loss_model = parse_loss_model_or_throw(v.get<std::string>());
      else if (key == "burstiness") c.burstiness = v.get<double>();
      else if (key == "lambda") c.lambdas = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
      else if (key == "budget") c.budget = parse_budget_or_throw(v.get<std::string>());
      else if (key == "threads") c.threads = v.get<int>();
      else if (key == "out") c.out = v.get<std::string>();
      else throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

/// Echo of the effective configuration; `threads` and `out` are left out so the echo does
/// not depend on how the run was executed.
inline nlohmann::json to_json(const BenchmarkConfig& c)
{
  nlohmann::json j;
  auto names = [](const auto& xs) {
    std::vector<std::string> out;
    for (auto x : xs) out.emplace_back(to_string(x));
    return out;
  };
  j["methods"] = names(c.methods);
  j["tasks"] = names(c.tasks);
  j["impairments"] = names(c.impairments);
  j["joint"] = nlohmann::json::array();
  for (const auto& [a, b] : c.joint) {
    j["joint"].push_back({std::string(to_string(a)), std::string(to_string(b))});
  }
  j["levels"] = c.levels;
  j["episodes"] = c.episodes;
  j["seed_base"] = c.seed_base;
  j["channel_model"] = std::string(to_string(c.loss_model));
  j["burstiness"] = c.burstiness;
  j["lambda"] = c.lambdas;
  j["budget"] = std::string(to_string(c.budget));
  return j;
}

/*------------------------------------------------------------------------------------------------*/
// Seeds and plan

/// Canonical integer for (task, impairment(s), level index(es)). Unused slots encode as 0xFF.
inline std::uint64_t condition_code(TaskKind task, const std::vector<std::pair<Dimension, int>>& levels)
{
  std::uint64_t code = static_cast<std::uint64_t>(task);
  for (std::size_t k = 0; k < 2; ++k) {
    std::uint64_t dim = 0xFF;
    std::uint64_t lvl = 0xFFFF;
    if (k < levels.size()) {
      dim = static_cast<std::uint64_t>(levels[k].first);
      lvl = static_cast<std::uint64_t>(levels[k].second);
    }
    code = (code << 8) | dim;
    code = (code << 16) | lvl;
  }
  return code;
}

inline std::uint64_t episode_seed(std::uint64_t seed_base, int episode) noexcept
{
  return seed_base + static_cast<std::uint64_t>(episode);
}

/// Condition seed; the method never enters the mix.
inline std::uint64_t derive_seed(std::uint64_t seed_base, TaskKind task,
                                 const std::vector<std::pair<Dimension, int>>& levels, int episode)
{
  return mix64(episode_seed(seed_base, episode) ^ mix64(condition_code(task, levels)));
}

inline std::uint64_t derive_seed(std::uint64_t seed_base, TaskKind task, Dimension d, int level_index, int episode)
{
  return derive_seed(seed_base, task, {{d, level_index}}, episode);
}

/// Channel stream: sub-stream 1 of the condition seed. Environment stream: sub-stream 0 of the
/// task-level seed, so layouts and motion are shared by every impairment and level.
inline EpisodeSeeds condition_streams(std::uint64_t seed_base, TaskKind task,
                                      const std::vector<std::pair<Dimension, int>>& levels, int episode)
{
  const std::uint64_t layout = derive_seed(seed_base, task, {}, episode);
  const std::uint64_t cond = derive_seed(seed_base, task, levels, episode);
  return {split_seed(layout, 0), split_seed(cond, 1)};
}

struct RunCondition
{
  StrategyKind method = StrategyKind::FullComm;
  double lambda = 0.3;
  /// Method label as written to results; carries lambda when several are swept.
  std::string method_label;
  TaskKind task = TaskKind::NAV;
  Pipeline pipeline;
  std::vector<std::pair<Dimension, int>> levels;
  int episode = 0;
  std::uint64_t seed = 0;
  EpisodeSeeds streams;
};

inline std::string format_real(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// "latency" or "latency+packet_loss".
inline std::string impairment_label(const Pipeline& p)
{
  std::string out;
  for (const auto& imp : p) {
    if (!out.empty()) out += '+';
    out += to_string(imp.dimension);
  }
  return out;
}

/// "250.000000" or "250.000000|40.000000".
inline std::string severity_label(const Pipeline& p)
{
  std::string out;
  for (const auto& imp : p) {
    if (!out.empty()) out += '|';
    out += format_real(imp.severity);
  }
  return out;
}

inline std::string describe(const RunCondition& c)
{
  return c.method_label + " " + std::string(to_string(c.task)) + " " + impairment_label(c.pipeline) + "@" +
         severity_label(c.pipeline) + " episode " + std::to_string(c.episode) + " seed " + std::to_string(c.seed);
}

inline std::string lambda_label(double lambda)
{
  return "resilient[lambda=" + nlohmann::json(lambda).dump() + "]";
}

/// Canonical order: method (lambda within Resilient), task, impairment, level, episode.
inline std::vector<RunCondition> plan_sweep(const BenchmarkConfig& config)
{
  validate(config);
  struct MethodEntry
  {
    StrategyKind kind;
    double lambda;
    std::string label;
  };
  std::vector<MethodEntry> methods;
  for (StrategyKind m : config.methods) {
    if (m == StrategyKind::Resilient && config.lambdas.size() > 1) {
      for (double l : config.lambdas) methods.push_back({m, l, lambda_label(l)});
    } else {
      methods.push_back({m, config.lambdas.front(), std::string(to_string(m))});
    }
  }

  std::vector<std::vector<std::pair<Dimension, int>>> cells;
  if (config.joint.empty()) {
    for (Dimension d : config.impairments) {
      for (int l = 0; l < config.levels; ++l) cells.push_back({{d, l}});
    }
  } else {
    for (const auto& [a, b] : config.joint) {
      for (int la = 0; la < config.levels; ++la) {
        for (int lb = 0; lb < config.levels; ++lb) cells.push_back({{a, la}, {b, lb}});
      }
    }
  }

  std::vector<RunCondition> plan;
  plan.reserve(methods.size() * config.tasks.size() * cells.size() * static_cast<std::size_t>(config.episodes));
  for (const auto& m : methods) {
    for (TaskKind t : config.tasks) {
      for (const auto& cell : cells) {
        Pipeline pipeline;
        for (const auto& [d, l] : cell) {
          pipeline.push_back({d, severity_grid(d, config.levels)[static_cast<std::size_t>(l)]});
        }
        for (int e = 0; e < config.episodes; ++e) {
          RunCondition c;
          c.method = m.kind;
          c.lambda = m.lambda;
          c.method_label = m.label;
          c.task = t;
          c.pipeline = pipeline;
          c.levels = cell;
          c.episode = e;
          c.seed = derive_seed(config.seed_base, t, cell, e);
          c.streams = condition_streams(config.seed_base, t, cell, e);
          plan.push_back(std::move(c));
        }
      }
    }
  }
  return plan;
}

/*------------------------------------------------------------------------------------------------*/
// Execution

inline EpisodeSetup setup_for(const RunCondition& c, const BenchmarkConfig& config)
{
  EpisodeSetup s;
  s.strategy = c.method;
  s.params.lambda = c.lambda;
  s.budget = config.budget;
  s.pipeline = c.pipeline;
  s.channel.loss_model = config.loss_model;
  s.channel.burstiness = config.loss_model == LossModelKind::GilbertElliott ? config.burstiness : 0.0;
  return s;
}

inline EpisodeResult run_condition(const RunCondition& c, const BenchmarkConfig& config)
{
  return run_episode(setup_for(c, config), default_episode_config(c.task), c.streams);
}

/// Runs every condition; result i belongs to plan[i] regardless of thread count.
inline std::vector<EpisodeResult> run_all(const std::vector<RunCondition>& plan, const BenchmarkConfig& config,
                                          int threads)
{
  if (threads < 1) throw ConfigError("threads must be >= 1");
  std::vector<EpisodeResult> results(plan.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::string error;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size() || failed.load()) return;
      try {
        results[i] = run_condition(plan[i], config);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!failed.exchange(true)) error = "episode failed (" + describe(plan[i]) + "): " + e.what();
        return;
      }
    }
  };

  const auto n = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(threads),
                                                                std::max<std::size_t>(plan.size(), 1)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed) throw std::runtime_error(error);
  return results;
}

/*------------------------------------------------------------------------------------------------*/
// Result rows

struct ResultRow
{
  std::string method;
  std::string task;
  std::string impairment;
  std::string severity;
  int episode = 0;
  std::uint64_t seed = 0;
  double score = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  double bits_per_step = 0.0;
  double msgs_per_step = 0.0;
  std::string failure_mode = "none";
};

/// First severity component of a (possibly joint) severity label.
inline double leading_severity(const std::string& label)
{
  return std::stod(label.substr(0, label.find('|')));
}

/// Labels each episode from the means of its (task, impairment, severity) condition.
inline void label_failures(std::vector<ResultRow>& rows)
{
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::map<std::string, std::vector<double>>> by_condition;
  for (const auto& r : rows) {
    by_condition[{r.task, r.impairment, r.severity}][r.method].push_back(r.score);
  }
  std::map<Key, FailureContext> contexts;
  for (const auto& [key, methods] : by_condition) {
    FailureContext ctx;
    for (const auto& [label, scores] : methods) {
      const auto kind = parse_strategy(label);
      const double mean = mean_std(scores).mean;
      if (kind == StrategyKind::NoComm) {
        ctx.no_comm_floor = mean;
      } else if (kind == StrategyKind::FullComm || kind == StrategyKind::Compressed ||
                 kind == StrategyKind::EventTriggered) {
        ctx.best_single_copy_mean = std::max(ctx.best_single_copy_mean.value_or(mean), mean);
      }
    }
    contexts[key] = ctx;
  }
  for (auto& r : rows) {
    FailureContext ctx = contexts[{r.task, r.impairment, r.severity}];
    ctx.task = parse_task(r.task).value_or(TaskKind::NAV);
    const auto kind = parse_strategy(r.method);
    ctx.strategy = kind ? *kind : StrategyKind::Resilient;
    EpisodeResult res;
    res.score = r.score;
    res.precision = r.precision;
    res.recall = r.recall;
    r.failure_mode = classify_failure(res, ctx);
  }
}

/// Rows in plan order with failure modes filled in.
inline std::vector<ResultRow> to_rows(const std::vector<RunCondition>& plan, const std::vector<EpisodeResult>& results)
{
  std::vector<ResultRow> rows;
  rows.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& c = plan[i];
    const auto& r = results[i];
    ResultRow row;
    row.method = c.method_label;
    row.task = std::string(to_string(c.task));
    row.impairment = impairment_label(c.pipeline);
    row.severity = severity_label(c.pipeline);
    row.episode = c.episode;
    row.seed = c.seed;
    row.score = r.score;
    row.precision = r.precision;
    row.recall = r.recall;
    const double steps = r.steps > 0 ? static_cast<double>(r.steps) : 1.0;
    row.bits_per_step = static_cast<double>(r.bits_sent) / steps;
    row.msgs_per_step = static_cast<double>(r.msgs_sent) / steps;
    rows.push_back(std::move(row));
  }
  label_failures(rows);
  return rows;
}

} // namespace agentcomm
