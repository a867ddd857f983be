#include <agentcomm/report.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace agentcomm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
  const auto p = fs::temp_directory_path() / ("agentcomm_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int bench(const std::string& args)
{
  const std::string cmd = std::string(AGENTCOMM_BENCH_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

BenchmarkConfig small_config()
{
  BenchmarkConfig c;
  c.tasks = {TaskKind::NAV, TaskKind::CP};
  c.impairments = {Dimension::PacketLoss, Dimension::Stale};
  c.levels = 3;
  c.episodes = 2;
  return c;
}

} // namespace

TEST(Seeds, EpisodeSeedStartsAtBase)
{
  EXPECT_EQ(episode_seed(42, 0), 42u);
  EXPECT_EQ(episode_seed(42, 29), 71u);
}

TEST(Seeds, MethodExcluded)
{
  const auto plan = plan_sweep(small_config());
  const std::size_t per_method = plan.size() / 5;
  for (std::size_t i = 0; i < per_method; ++i) {
    for (std::size_t m = 1; m < 5; ++m) {
      const auto& a = plan[i];
      const auto& b = plan[m * per_method + i];
      EXPECT_EQ(a.seed, b.seed);
      EXPECT_EQ(a.streams.channel, b.streams.channel);
      EXPECT_EQ(a.streams.environment, b.streams.environment);
    }
  }
}

TEST(Seeds, DistinctLevelsRarelyCollide)
{
  std::mt19937_64 rng{5};
  int collisions = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const auto task = kAllTasks[rng() % 3];
    const auto dim = kAllDimensions[rng() % 6];
    const int a = static_cast<int>(rng() % 11);
    const int b = (a + 1 + static_cast<int>(rng() % 10)) % 11;
    const int ep = static_cast<int>(rng() % 30);
    collisions += derive_seed(42, task, dim, a, ep) == derive_seed(42, task, dim, b, ep) ? 1 : 0;
  }
  EXPECT_LE(collisions, n / 10000);
}

TEST(Seeds, LayoutSharedAcrossLevelsChannelNot)
{
  const auto s0 = condition_streams(42, TaskKind::NAV, {{Dimension::Stale, 0}}, 3);
  const auto s5 = condition_streams(42, TaskKind::NAV, {{Dimension::Stale, 5}}, 3);
  const auto l5 = condition_streams(42, TaskKind::NAV, {{Dimension::Latency, 5}}, 3);
  EXPECT_EQ(s0.environment, s5.environment);
  EXPECT_EQ(s0.environment, l5.environment);
  EXPECT_NE(s0.channel, s5.channel);
  EXPECT_NE(s5.channel, l5.channel);
}

TEST(Plan, DefaultSize)
{
  EXPECT_EQ(plan_sweep(BenchmarkConfig{}).size(), 29700u);
}

TEST(Plan, SingleCellProduct)
{
  BenchmarkConfig c;
  c.methods = {StrategyKind::FullComm};
  c.tasks = {TaskKind::NAV};
  c.impairments = {Dimension::Latency};
  EXPECT_EQ(plan_sweep(c).size(), 330u);
}

TEST(Plan, JointGrid)
{
  BenchmarkConfig c;
  c.methods = {StrategyKind::FullComm};
  c.tasks = {TaskKind::NAV};
  c.joint = {{Dimension::Latency, Dimension::PacketLoss}};
  c.episodes = 3;
  const auto plan = plan_sweep(c);
  EXPECT_EQ(plan.size(), 121u * 3u);
  EXPECT_EQ(plan.back().pipeline.size(), 2u);
  EXPECT_EQ(impairment_label(plan.back().pipeline), "latency+packet_loss");
  EXPECT_EQ(severity_label(plan.back().pipeline), "500.000000|80.000000");
}

TEST(Plan, LambdaAxisOnlyExpandsResilient)
{
  BenchmarkConfig c = small_config();
  c.lambdas = {0.0, 0.3, 1.0, 2.0};
  EXPECT_EQ(plan_sweep(c).size(), plan_sweep(small_config()).size() / 5 * 8);
}

TEST(Plan, CanonicalOrderAndCompleteness)
{
  const auto plan = plan_sweep(small_config());
  ASSERT_EQ(plan.size(), 5u * 2u * 2u * 3u * 2u);
  std::set<std::tuple<std::string, int, std::string, std::string, int>> seen;
  for (const auto& c : plan) {
    seen.insert({c.method_label, static_cast<int>(c.task), impairment_label(c.pipeline), severity_label(c.pipeline),
                 c.episode});
  }
  EXPECT_EQ(seen.size(), plan.size());
  EXPECT_EQ(plan[0].method, StrategyKind::NoComm);
  EXPECT_EQ(plan[0].task, TaskKind::NAV);
  EXPECT_EQ(plan[1].episode, 1);
  EXPECT_EQ(plan[2].levels[0].second, 1);
  EXPECT_EQ(plan.back().method, StrategyKind::Resilient);
}

TEST(Config, InvalidNamesAreConfigErrors)
{
  try {
    parse_methods({"full_comm", "telepathy"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("telepathy"), std::string::npos);
  }
  EXPECT_THROW(parse_tasks({"chess"}), ConfigError);
  EXPECT_THROW(parse_joint("latency"), ConfigError);
  BenchmarkConfig c;
  c.episodes = 0;
  EXPECT_THROW(plan_sweep(c), ConfigError);
  c = BenchmarkConfig{};
  c.methods.clear();
  EXPECT_THROW(plan_sweep(c), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"colour", "red"}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"episodes", "many"}}), ConfigError);
}

TEST(Config, JsonEchoRoundTrips)
{
  BenchmarkConfig c = small_config();
  c.loss_model = LossModelKind::GilbertElliott;
  c.budget = Budget::X2;
  c.lambdas = {0.0, 1.0};
  c.joint = {{Dimension::Async, Dimension::Stale}};
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(parse_loss_model("gilbert-elliott"), LossModelKind::GilbertElliott);
}

TEST(Run, ThreadCountDoesNotChangeBytes)
{
  BenchmarkConfig c = small_config();
  const auto plan = plan_sweep(c);
  std::ostringstream one;
  std::ostringstream four;
  write_csv(to_rows(plan, run_all(plan, c, 1)), one);
  write_csv(to_rows(plan, run_all(plan, c, 4)), four);
  EXPECT_EQ(one.str(), four.str());
}

TEST(Run, EmptyPlan)
{
  EXPECT_TRUE(run_all({}, BenchmarkConfig{}, 3).empty());
  EXPECT_THROW(run_all({}, BenchmarkConfig{}, 0), ConfigError);
}

TEST(Run, FailingEpisodeNamesCondition)
{
  auto plan = plan_sweep(small_config());
  plan.resize(1);
  plan[0].pipeline = {{Dimension::PacketLoss, 500}};
  try {
    run_all(plan, small_config(), 1);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("no_comm nav packet_loss"), std::string::npos);
  }
}

TEST(Csv, RoundTripIsByteStable)
{
  const auto c = small_config();
  const auto plan = plan_sweep(c);
  const auto rows = to_rows(plan, run_all(plan, c, 1));
  std::ostringstream first;
  write_csv(rows, first);
  std::istringstream in(first.str());
  const auto back = read_csv(in);
  ASSERT_EQ(back.size(), rows.size());
  std::ostringstream second;
  write_csv(back, second);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(first.str().substr(0, first.str().find('\n')), kCsvHeader);
}

TEST(Csv, EmptyPrecisionForNonCp)
{
  ResultRow r;
  r.method = "full_comm";
  r.task = "nav";
  r.impairment = "latency";
  r.severity = format_real(0);
  r.score = 100.0 / 3.0;
  std::ostringstream out;
  write_csv({r}, out);
  EXPECT_NE(out.str().find(",33.333333,,,"), std::string::npos);
}

TEST(Csv, MalformedIsIoError)
{
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(read_csv(bad_header), IoError);
  std::istringstream short_row(std::string(kCsvHeader) + "\nx,y\n");
  EXPECT_THROW(read_csv(short_row), IoError);
  EXPECT_THROW(read_csv(fs::path("/nonexistent/results.csv")), IoError);
}

TEST(Summary, AggregationIndependentOfRowOrder)
{
  const auto c = small_config();
  const auto plan = plan_sweep(c);
  auto rows = to_rows(plan, run_all(plan, c, 1));
  const auto ref = summary_json(summarize(rows), nullptr, 0);
  // reverse within each series so first-appearance order of keys is preserved
  std::vector<ResultRow> shuffled;
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    shuffled.push_back(rows[i + 1]);
    shuffled.push_back(rows[i]);
  }
  EXPECT_EQ(summary_json(summarize(shuffled), nullptr, 0), ref);
}

TEST(Summary, NoCommFlatAndRanked)
{
  const auto c = small_config();
  const auto plan = plan_sweep(c);
  const auto s = summarize(to_rows(plan, run_all(plan, c, 1)));
  int checked = 0;
  for (const auto& cond : s.conditions) {
    if (cond.method != "no_comm") continue;
    EXPECT_EQ(*cond.aurc, 100.0);
    EXPECT_EQ(*cond.npd_max, 0.0);
    ++checked;
  }
  EXPECT_EQ(checked, 4);
  for (const auto& cond : s.conditions) {
    EXPECT_GE(cond.clean_rank, 1);
    EXPECT_GE(cond.worst_rank, 1);
  }
}

TEST(Cli, RunProducesExpectedRows)
{
  const auto out = scratch("cli_run");
  ASSERT_EQ(bench("run --episodes 2 --tasks nav --impairments packet_loss --out " + out.string()), 0);
  const auto text = slurp(out / "results.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 111);
  for (const char* f : {"summary.json", "config.json", "curves.csv", "heatmap.csv", "ranks.csv", "aurc.csv",
                        "radar.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const auto again = scratch("cli_run_again");
  ASSERT_EQ(bench("run --episodes 2 --tasks nav --impairments packet_loss --threads 3 --out " + again.string()), 0);
  EXPECT_EQ(slurp(again / "results.csv"), text);
  EXPECT_EQ(slurp(again / "heatmap.csv"), slurp(out / "heatmap.csv"));

  const auto rep = scratch("cli_report");
  EXPECT_EQ(bench("report --results " + out.string() + " --out " + rep.string()), 0);
  EXPECT_TRUE(fs::exists(rep / "summary.json"));
  EXPECT_EQ(slurp(rep / "curves.csv"), slurp(out / "curves.csv"));
}

TEST(Cli, ExitCodes)
{
  EXPECT_EQ(bench("run --no-such-flag"), 1);
  EXPECT_EQ(bench("run --methods telepathy --out " + scratch("cli_bad").string()), 1);
  EXPECT_EQ(bench("run --budget 3x --out " + scratch("cli_bad").string()), 1);
  EXPECT_EQ(bench("run --config /nonexistent/config.json"), 2);
  EXPECT_EQ(bench("report --results /nonexistent/dir"), 2);
  const auto cfg = scratch("cli_cfg");
  fs::create_directories(cfg);
  std::ofstream(cfg / "bad.json") << "{ not json";
  EXPECT_EQ(bench("run --config " + (cfg / "bad.json").string()), 1);
}

TEST(Cli, ConfigFileWithOverrides)
{
  const auto dir = scratch("cli_cfg_ok");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"methods": ["no_comm", "resilient"], "tasks": ["cp"],
    "impairments": ["stale"], "episodes": 5, "levels": 3})";
  ASSERT_EQ(bench("run --config " + (dir / "c.json").string() + " --episodes 1 --out " + (dir / "o").string()), 0);
  const auto text = slurp(dir / "o" / "results.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 3);
  const auto summary = nlohmann::json::parse(slurp(dir / "o" / "summary.json"));
  EXPECT_EQ(summary["meta"]["config"]["episodes"], 1);
  EXPECT_EQ(summary["conditions"].size(), 2u);
}
