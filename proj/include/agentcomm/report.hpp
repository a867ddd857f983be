#pragma once

#include <agentcomm/harness.hpp>
#include <agentcomm/metrics.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace agentcomm {

inline constexpr const char* kCsvHeader =
  "method,task,impairment,severity,episode,seed,score,precision,recall,bits_per_step,msgs_per_step,failure_mode";

/*------------------------------------------------------------------------------------------------*/
// CSV

inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& out)
{
  out << kCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.method << ',' << r.task << ',' << r.impairment << ',' << r.severity << ',' << r.episode << ','
        << r.seed << ',' << format_real(r.score) << ',' << opt(r.precision) << ',' << opt(r.recall) << ','
        << format_real(r.bits_per_step) << ',' << format_real(r.msgs_per_step) << ',' << r.failure_mode << '\n';
  }
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path)
{
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path)
{
  auto out = open_output(path);
  write_csv(rows, out);
  finish_output(out, path);
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double to_real(const std::string& s, std::size_t line)
{
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError("line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

} // namespace detail

/// Parses a results file; malformed content is reported as an IoError.
inline std::vector<ResultRow> read_csv(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("results header mismatch");
  std::vector<ResultRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = detail::split_fields(line);
    if (f.size() != 12) throw IoError("line " + std::to_string(n) + ": expected 12 fields");
    ResultRow r;
    r.method = f[0];
    r.task = f[1];
    r.impairment = f[2];
    r.severity = f[3];
    r.episode = static_cast<int>(detail::to_real(f[4], n));
    try {
      r.seed = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw IoError("line " + std::to_string(n) + ": bad seed");
    }
    r.score = detail::to_real(f[6], n);
    if (!f[7].empty()) r.precision = detail::to_real(f[7], n);
    if (!f[8].empty()) r.recall = detail::to_real(f[8], n);
    r.bits_per_step = detail::to_real(f[9], n);
    r.msgs_per_step = detail::to_real(f[10], n);
    r.failure_mode = f[11];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRow> read_csv(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return read_csv(in);
}

/*------------------------------------------------------------------------------------------------*/
// Aggregation

/// One (task, impairment, method) series. Order of points follows the results file.
struct ConditionSummary
{
  std::string task;
  std::string impairment;
  std::string method;
  std::vector<std::string> severity_labels;
  RobustnessCurve curve;
  std::optional<double> npd_max;
  std::optional<double> aurc;
  int clean_rank = 0;
  int worst_rank = 0;
  std::map<std::string, int> failure_counts;
  double bits_per_step = 0.0;
  double msgs_per_step = 0.0;
};

struct Summary
{
  std::vector<ConditionSummary> conditions;
  /// Per (task, impairment): severity label -> rank table.
  std::vector<std::tuple<std::string, std::string, std::vector<std::pair<std::string, RankTable>>>> ranks;
};

namespace detail {

template <typename K, typename V>
V& ordered_slot(std::vector<std::pair<K, V>>& v, const K& key)
{
  for (auto& [k, val] : v) {
    if (k == key) return val;
  }
  v.emplace_back(key, V{});
  return v.back().second;
}

} // namespace detail

inline Summary summarize(const std::vector<ResultRow>& rows)
{
  using SeriesKey = std::tuple<std::string, std::string, std::string>;
  struct Series
  {
    std::vector<std::pair<std::string, std::vector<double>>> scores;
    std::map<std::string, int> failures;
    std::vector<double> bits, msgs;
  };
  std::vector<std::pair<SeriesKey, Series>> series;
  for (const auto& r : rows) {
    auto& s = detail::ordered_slot(series, SeriesKey{r.task, r.impairment, r.method});
    detail::ordered_slot(s.scores, r.severity).push_back(r.score);
    s.failures[r.failure_mode] += 1;
    s.bits.push_back(r.bits_per_step);
    s.msgs.push_back(r.msgs_per_step);
  }

  Summary out;
  for (auto& [key, s] : series) {
    ConditionSummary c;
    std::tie(c.task, c.impairment, c.method) = key;
    c.curve.task = c.task;
    c.curve.impairment = c.impairment;
    c.curve.method = c.method;
    for (const auto& [label, scores] : s.scores) {
      const auto ms = mean_std(scores);
      c.severity_labels.push_back(label);
      c.curve.points.push_back({leading_severity(label), ms.mean, ms.std, static_cast<int>(scores.size())});
    }
    const auto& pts = c.curve.points;
    c.npd_max = npd(pts.front().mean, pts.back().mean);
    const bool joint = c.impairment.find('+') != std::string::npos;
    if (!joint && pts.size() >= 2 && pts.back().severity > pts.front().severity) c.aurc = aurc(c.curve);
    c.failure_counts = s.failures;
    c.bits_per_step = mean_std(s.bits).mean;
    c.msgs_per_step = mean_std(s.msgs).mean;
    out.conditions.push_back(std::move(c));
  }

  // Ranks over methods sharing (task, impairment), per severity label.
  using GroupKey = std::pair<std::string, std::string>;
  std::vector<std::pair<GroupKey, std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>>>>
    groups;
  for (const auto& c : out.conditions) {
    auto& by_level = detail::ordered_slot(groups, GroupKey{c.task, c.impairment});
    for (std::size_t i = 0; i < c.curve.points.size(); ++i) {
      detail::ordered_slot(by_level, c.severity_labels[i]).emplace_back(c.method, c.curve.points[i].mean);
    }
  }
  for (const auto& [gk, by_level] : groups) {
    std::vector<std::pair<std::string, RankTable>> tables;
    for (const auto& [label, scores] : by_level) tables.emplace_back(label, rank_table(scores));
    for (auto& c : out.conditions) {
      if (c.task != gk.first || c.impairment != gk.second) continue;
      const RankTable& clean = tables.front().second;
      const RankTable& worst = tables.back().second;
      if (auto it = clean.find(c.method); it != clean.end()) c.clean_rank = it->second;
      if (auto it = worst.find(c.method); it != worst.end()) c.worst_rank = it->second;
    }
    out.ranks.emplace_back(gk.first, gk.second, std::move(tables));
  }
  return out;
}

/*------------------------------------------------------------------------------------------------*/
// Output files

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v)
{
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

/// Same text as the value's rendering in summary.json.
inline std::string json_text(const std::optional<double>& v)
{
  return v ? nlohmann::json(*v).dump() : std::string();
}

} // namespace detail

inline nlohmann::json summary_json(const Summary& s, const nlohmann::json& config_echo, double runtime_ms)
{
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& c : s.conditions) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < c.curve.points.size(); ++i) {
      const auto& p = c.curve.points[i];
      points.push_back({{"severity", c.severity_labels[i]}, {"mean", p.mean}, {"std", p.std}, {"n", p.n}});
    }
    nlohmann::json failures = nlohmann::json::object();
    for (const auto& [label, n] : c.failure_counts) failures[label] = n;
    conditions.push_back({{"task", c.task},
                          {"impairment", c.impairment},
                          {"method", c.method},
                          {"points", points},
                          {"npd_max", detail::opt_json(c.npd_max)},
                          {"aurc", detail::opt_json(c.aurc)},
                          {"clean_rank", c.clean_rank},
                          {"worst_rank", c.worst_rank},
                          {"rank_delta", c.worst_rank - c.clean_rank},
                          {"failure_counts", failures},
                          {"bits_per_step", c.bits_per_step},
                          {"msgs_per_step", c.msgs_per_step}});
  }
  nlohmann::json j;
  j["conditions"] = conditions;
  j["meta"] = {{"version", kVersion}, {"config", config_echo}, {"total_runtime_ms", runtime_ms}};
  return j;
}

/// curves.csv, heatmap.csv, ranks.csv, aurc.csv and radar.csv under `dir`.
inline void write_figure_data(const Summary& s, const std::filesystem::path& dir)
{
  using detail::json_text;
  {
    const auto path = dir / "curves.csv";
    auto out = open_output(path);
    out << "task,impairment,method,severity,mean,std,n\n";
    for (const auto& c : s.conditions) {
      for (std::size_t i = 0; i < c.curve.points.size(); ++i) {
        const auto& p = c.curve.points[i];
        out << c.task << ',' << c.impairment << ',' << c.method << ',' << c.severity_labels[i] << ','
            << json_text(p.mean) << ',' << json_text(p.std) << ',' << p.n << '\n';
      }
    }
    finish_output(out, path);
  }
  {
    const auto path = dir / "heatmap.csv";
    auto out = open_output(path);
    out << "task,impairment,method,npd\n";
    for (const auto& c : s.conditions) {
      out << c.task << ',' << c.impairment << ',' << c.method << ',' << json_text(c.npd_max) << '\n';
    }
    finish_output(out, path);
  }
  {
    const auto path = dir / "ranks.csv";
    auto out = open_output(path);
    out << "task,impairment,severity,method,rank\n";
    for (const auto& [task, impairment, tables] : s.ranks) {
      for (const auto& [label, table] : tables) {
        for (const auto& c : s.conditions) {
          if (c.task != task || c.impairment != impairment) continue;
          out << task << ',' << impairment << ',' << label << ',' << c.method << ',' << table.at(c.method) << '\n';
        }
      }
    }
    finish_output(out, path);
  }
  {
    const auto path = dir / "aurc.csv";
    auto out = open_output(path);
    out << "task,impairment,method,aurc\n";
    for (const auto& c : s.conditions) {
      if (c.impairment.find('+') != std::string::npos) continue;
      out << c.task << ',' << c.impairment << ',' << c.method << ',' << json_text(c.aurc) << '\n';
    }
    finish_output(out, path);
  }
  {
    const auto path = dir / "radar.csv";
    auto out = open_output(path);
    out << "task,method";
    for (Dimension d : kAllDimensions) out << ',' << to_string(d);
    out << '\n';
    std::vector<std::pair<std::pair<std::string, std::string>, std::map<std::string, std::optional<double>>>> radar;
    for (const auto& c : s.conditions) {
      detail::ordered_slot(radar, std::pair{c.task, c.method})[c.impairment] = c.npd_max;
    }
    for (const auto& [key, by_dim] : radar) {
      out << key.first << ',' << key.second;
      for (Dimension d : kAllDimensions) {
        auto it = by_dim.find(std::string(to_string(d)));
        out << ',' << (it == by_dim.end() ? std::string() : json_text(it->second));
      }
      out << '\n';
    }
    finish_output(out, path);
  }
}

inline constexpr const char* kResultsFile = "results.csv";
inline constexpr const char* kConfigEchoFile = "config.json";
inline constexpr const char* kSummaryFile = "summary.json";

/// Reads `dir/results.csv` (and the config echo when present) and writes summary.json plus
/// per-figure data files into `out_dir`.
inline Summary write_report(const std::filesystem::path& dir, const std::filesystem::path& out_dir,
                            std::optional<double> runtime_ms = std::nullopt)
{
  const auto start = std::chrono::steady_clock::now();
  const auto rows = read_csv(dir / kResultsFile);
  nlohmann::json echo = nullptr;
  if (std::ifstream in(dir / kConfigEchoFile); in) {
    try {
      in >> echo;
    } catch (const nlohmann::json::exception&) {
      throw IoError("malformed " + (dir / kConfigEchoFile).string());
    }
  }
  const Summary s = summarize(rows);
  write_figure_data(s, out_dir);
  const double elapsed =
    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  const auto path = out_dir / kSummaryFile;
  auto out = open_output(path);
  out << summary_json(s, echo, runtime_ms.value_or(0.0) + elapsed).dump(2) << '\n';
  finish_output(out, path);
  return s;
}

/// Full `run`: sweep, results.csv, config echo, then the report into the same directory.
inline Summary run_benchmark(const BenchmarkConfig& config)
{
  const auto start = std::chrono::steady_clock::now();
  const auto plan = plan_sweep(config);
  const auto rows = to_rows(plan, run_all(plan, config, config.threads));
  const std::filesystem::path dir = config.out;
  write_csv(rows, dir / kResultsFile);
  {
    const auto path = dir / kConfigEchoFile;
    auto out = open_output(path);
    out << to_json(config).dump(2) << '\n';
    finish_output(out, path);
  }
  const double elapsed =
    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return write_report(dir, dir, elapsed);
}

} // namespace agentcomm
