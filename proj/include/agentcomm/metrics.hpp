#pragma once

#include <agentcomm/tasks.hpp>
#include <agentcomm/types.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agentcomm {

struct MeanStd
{
  double mean = 0.0;
  double std = 0.0;
};

/// Arithmetic mean and sample standard deviation (n-1; 0 for n == 1). Samples are summed in
/// sorted order so the result does not depend on input order.
inline MeanStd mean_std(std::span<const double> samples)
{
  if (samples.empty()) {
    throw std::invalid_argument("mean_std of an empty sample");
  }
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) {
    sum += x;
  }
  const double n = static_cast<double>(v.size());
  MeanStd out;
  out.mean = sum / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) {
      ss += (x - out.mean) * (x - out.mean);
    }
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

/// Percent of clean performance lost. Absent when the clean mean is not positive.
inline std::optional<double> npd(double clean_mean, double degraded_mean) noexcept
{
  if (!(clean_mean > 0.0)) {
    return std::nullopt;
  }
  return 100.0 * (clean_mean - degraded_mean) / clean_mean;
}

struct CurvePoint
{
  double severity = 0.0;
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
};

struct RobustnessCurve
{
  std::string method;
  std::string task;
  std::string impairment;
  std::vector<CurvePoint> points;
};

/// Trapezoidal area over severity normalized to [0, 1], as a percent of the clean rectangle.
/// Means are divided by the clean mean before integrating, so a flat curve gives exactly 100.
inline std::optional<double> aurc(const RobustnessCurve& curve)
{
  const auto& pts = curve.points;
  if (pts.size() < 2) {
    throw std::invalid_argument("aurc needs at least two points");
  }
  const double clean = pts.front().mean;
  if (!(clean > 0.0)) {
    return std::nullopt;
  }
  const double span = pts.back().severity - pts.front().severity;
  if (!(span > 0.0)) {
    throw std::invalid_argument("aurc needs increasing severities");
  }
  double twice_area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dx = pts[i].severity - pts[i - 1].severity;
    twice_area += dx * (pts[i].mean / clean + pts[i - 1].mean / clean);
  }
  return 100.0 * twice_area / (2.0 * span);
}

using RankTable = std::map<std::string, int>;

inline constexpr double kRankTieTolerance = 1e-9;

/// Competition ranking ("1224"), higher mean is better, means within tolerance tie.
inline RankTable rank_table(const std::vector<std::pair<std::string, double>>& scores,
                            double tolerance = kRankTieTolerance)
{
  RankTable out;
  for (const auto& [method, mean] : scores) {
    int better = 0;
    for (const auto& [other, other_mean] : scores) {
      if (other_mean > mean + tolerance) {
        ++better;
      }
    }
    out[method] = better + 1;
  }
  return out;
}

/// worst rank - clean rank per method.
inline std::map<std::string, int> rank_stability(const RankTable& clean, const RankTable& worst)
{
  if (clean.size() != worst.size()) {
    throw std::invalid_argument("rank tables cover different methods");
  }
  std::map<std::string, int> delta;
  for (const auto& [method, rank] : clean) {
    auto it = worst.find(method);
    if (it == worst.end()) {
      throw std::invalid_argument("rank tables cover different methods: " + method);
    }
    delta[method] = it->second - rank;
  }
  return delta;
}

/// Condition-level aggregates used to label one episode.
struct FailureContext
{
  TaskKind task = TaskKind::NAV;
  StrategyKind strategy = StrategyKind::FullComm;
  /// No-Comm mean under the same condition.
  std::optional<double> no_comm_floor;
  /// Best mean among single-copy communicating strategies under the same condition.
  std::optional<double> best_single_copy_mean;
};

inline constexpr double kFloorMargin = 2.0;
inline constexpr double kHallucinationPrecision = 0.5;
inline constexpr double kIsolationFactor = 1.8;

/// Rule-based counters; never used for scoring.
inline std::string classify_failure(const EpisodeResult& result, const FailureContext& ctx)
{
  if (ctx.strategy == StrategyKind::NoComm) {
    return "none";
  }
  if (ctx.task == TaskKind::CP && result.precision && *result.precision < kHallucinationPrecision) {
    return "hallucination";
  }
  if (ctx.task == TaskKind::NAV && ctx.no_comm_floor && result.score <= *ctx.no_comm_floor + kFloorMargin) {
    return "waypoint-loss";
  }
  if (ctx.strategy == StrategyKind::Resilient && ctx.best_single_copy_mean && *ctx.best_single_copy_mean > 0.0 &&
      result.score >= kIsolationFactor * *ctx.best_single_copy_mean) {
    return "graceful-isolation";
  }
  return "none";
}

} // namespace agentcomm
