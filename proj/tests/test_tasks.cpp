#include <agentcomm/tasks.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace agentcomm;

namespace {

EpisodeResult run(TaskKind task, StrategyKind s, Pipeline p, std::uint64_t seed, EpisodeTrace* trace = nullptr)
{
  EpisodeSetup setup;
  setup.strategy = s;
  setup.pipeline = std::move(p);
  return run_episode(setup, default_episode_config(task), seeds_from(seed), trace);
}

} // namespace

TEST(Scoring, F1HalfOfTruth)
{
  const std::vector<GridPos> truth{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const std::vector<GridPos> pred{{0, 0}, {1, 1}};
  EXPECT_NEAR(f1_score(pred, truth), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(f1_score(std::vector<GridPos>{}, std::vector<GridPos>{}), 1.0);
  EXPECT_EQ(f1_score(std::vector<GridPos>{}, truth), 0.0);
  const auto s = detection_scores(to_mask(pred), to_mask(truth));
  EXPECT_EQ(s.precision, 1.0);
  EXPECT_EQ(s.recall, 0.5);
}

TEST(Waypoint, DecodeArgmax)
{
  EXPECT_EQ(*decode_waypoint(one_hot({12, 3})), (GridPos{12, 3}));
  EXPECT_FALSE(decode_waypoint(zero_payload()));
  Payload tie = zero_payload();
  tie[50] = 0.7;
  tie[20] = 0.7;
  EXPECT_EQ(decode_waypoint(tie)->flat(), 20u);
}

TEST(Motion, GreedyClosesRowFirst)
{
  EXPECT_EQ(greedy_step({0, 0}, {3, 3}), (GridPos{1, 0}));
  EXPECT_EQ(greedy_step({3, 0}, {3, 3}), (GridPos{3, 1}));
  EXPECT_EQ(greedy_step({3, 3}, {3, 3}), (GridPos{3, 3}));
  EXPECT_EQ(manhattan({0, 0}, {3, 4}), 7);
}

TEST(Motion, RandomWalkStaysOnGrid)
{
  SplitMix64 g{1};
  std::set<std::size_t> corner;
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_walk_step({0, 0}, g);
    ASSERT_TRUE(p.on_grid());
    ASSERT_LE(manhattan(p, {0, 0}), 1);
    corner.insert(p.flat());
  }
  EXPECT_EQ(corner.size(), 3u);
}

TEST(Layout, SampleCellsDistinct)
{
  SplitMix64 g{2};
  const auto cells = sample_cells(30, g);
  EXPECT_EQ(std::set<std::size_t>(cells.begin(), cells.end()).size(), 30u);
  for (auto c : cells) EXPECT_LT(c, kCells);
}

TEST(Episodes, Deterministic)
{
  for (TaskKind t : kAllTasks) {
    const auto a = run(t, StrategyKind::Resilient, {{Dimension::PacketLoss, 40}}, 5);
    const auto b = run(t, StrategyKind::Resilient, {{Dimension::PacketLoss, 40}}, 5);
    EXPECT_EQ(a.score, b.score);
    EXPECT_EQ(a.bits_sent, b.bits_sent);
  }
}

TEST(Episodes, NoCommSendsNothingAndIgnoresChannel)
{
  for (TaskKind t : kAllTasks) {
    const auto clean = run(t, StrategyKind::NoComm, {}, 9);
    EXPECT_EQ(clean.bits_sent, 0);
    EXPECT_EQ(clean.msgs_sent, 0);
    for (Dimension d : kAllDimensions) {
      EXPECT_EQ(run(t, StrategyKind::NoComm, {{d, max_severity(d)}}, 9).score, clean.score);
    }
  }
}

TEST(Episodes, NavScoreIsWaypointFraction)
{
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double score = run(TaskKind::NAV, StrategyKind::FullComm, {}, s).score;
    const double reached = score * 12.0 / 100.0;
    EXPECT_NEAR(reached, std::round(reached), 1e-9);
  }
}

TEST(Episodes, SearchScoreIsTargetFraction)
{
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double score = run(TaskKind::SEARCH, StrategyKind::FullComm, {}, s).score;
    EXPECT_NEAR(score * 20.0 / 100.0, std::round(score * 20.0 / 100.0), 1e-9);
  }
}

TEST(Episodes, CpReportsPrecisionRecall)
{
  const auto r = run(TaskKind::CP, StrategyKind::FullComm, {}, 3);
  ASSERT_TRUE(r.precision);
  ASSERT_TRUE(r.recall);
  EXPECT_GE(r.score, 0.0);
  EXPECT_LE(r.score, 1.0);
  EXPECT_FALSE(run(TaskKind::NAV, StrategyKind::FullComm, {}, 3).precision);
}

TEST(Episodes, CpCleanIdenticalAcrossMethods)
{
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double ref = run(TaskKind::CP, StrategyKind::NoComm, {}, s).score;
    for (StrategyKind m : kAllStrategies) EXPECT_EQ(run(TaskKind::CP, m, {}, s).score, ref);
  }
}

TEST(Episodes, CpTransportImmunity)
{
  for (std::uint64_t s = 0; s < 3; ++s) {
    for (StrategyKind m : kAllStrategies) {
      const double clean = run(TaskKind::CP, m, {}, s).score;
      for (Dimension d : {Dimension::Latency, Dimension::PacketLoss, Dimension::Bandwidth, Dimension::Async}) {
        EXPECT_EQ(run(TaskKind::CP, m, {{d, max_severity(d)}}, s).score, clean);
      }
    }
  }
}

TEST(Episodes, SingleCopyStrategiesEquivalentOnNavSearch)
{
  for (TaskKind t : {TaskKind::NAV, TaskKind::SEARCH}) {
    for (Dimension d : kAllDimensions) {
      for (std::uint64_t s = 0; s < 3; ++s) {
        const Pipeline p{{d, max_severity(d) / 2}};
        const double full = run(t, StrategyKind::FullComm, p, s).score;
        EXPECT_EQ(run(t, StrategyKind::Compressed, p, s).score, full);
        EXPECT_EQ(run(t, StrategyKind::EventTriggered, p, s).score, full);
      }
    }
  }
}

TEST(Episodes, MethodDoesNotChangeChannelDraws)
{
  EpisodeTrace a;
  EpisodeTrace b;
  run(TaskKind::NAV, StrategyKind::FullComm, {{Dimension::PacketLoss, 48}}, 21, &a);
  run(TaskKind::NAV, StrategyKind::Compressed, {{Dimension::PacketLoss, 48}}, 21, &b);
  ASSERT_FALSE(a.drops.empty());
  EXPECT_EQ(a.drops, b.drops);
}

TEST(Episodes, AccountingCountsCopies)
{
  const auto full = run(TaskKind::NAV, StrategyKind::FullComm, {}, 4);
  EXPECT_EQ(full.bits_sent, full.msgs_sent * 400 * 32);
  EXPECT_LE(full.msgs_sent, 4 * full.steps);
  const auto res = run(TaskKind::CP, StrategyKind::Resilient, {}, 4);
  const auto one = run(TaskKind::CP, StrategyKind::FullComm, {}, 4);
  EXPECT_EQ(res.msgs_sent, 2 * one.msgs_sent);
  EXPECT_EQ(run(TaskKind::CP, StrategyKind::Compressed, {}, 4).bits_sent, one.bits_sent / 8);
}

TEST(Episodes, BandwidthCollapseEqualsNoComm)
{
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double floor = run(TaskKind::NAV, StrategyKind::NoComm, {}, s).score;
    for (StrategyKind m : kAllStrategies) {
      EXPECT_EQ(run(TaskKind::NAV, m, {{Dimension::Bandwidth, 100}}, s).score, floor);
    }
  }
}
