#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include <fmt/core.h>

#include <swarmvv/csv.hpp>
#include <swarmvv/pipeline.hpp>

#include "test_support.hpp"

using namespace swarmvv;

namespace {

const ZoneMap& zones() {
  static const ZoneMap z = build_zone_map(default_scenario());
  return z;
}

/// Robots parked at fixed positions, all Searching, for `steps` steps.
TrialOutput parked_trial(const std::vector<Vec2>& where, int steps, const std::vector<bool>& moving = {}) {
  TrialOutput t;
  t.n_robots = static_cast<int>(where.size());
  t.n_steps = steps;
  t.dt = 0.02;
  for (int k = 0; k < steps; ++k) {
    std::array<int, kNumBehaviourStates> c{};
    c[0] = t.n_robots;
    t.state_counts.push_back(c);
    for (int r = 0; r < t.n_robots; ++r) {
      t.robot_states.push_back(BehaviourState::Searching);
      t.positions.push_back(where[r]);
      t.speeds.push_back(!moving.empty() && moving[r] ? 0.5 : 0.0);
      t.in_deposit.push_back(zones().in_deposit(where[r]) ? 1 : 0);
    }
  }
  return t;
}

CleanSeries flags_series(int n, double period, const std::vector<int>& red, const std::vector<int>& critical,
                         const std::vector<int>& single) {
  CleanSeries s;
  s.sample_period_s = period;
  s.samples.resize(n);
  for (int i = 0; i < n; ++i) s.samples[i].t = i;
  for (int i : red) s.samples[i].flag[0] = true;
  for (int i : critical) s.samples[i].flag[1] = true;
  for (int i : single) s.samples[i].flag[2] = true;
  for (auto& x : s.samples) {
    for (int f = 0; f < kNumFlags; ++f) x.freq[f] = x.flag[f] ? 1.0 : 0.0;
  }
  return s;
}

std::vector<int> range(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Pipeline, AllSearchingProbabilities) {
  const CleanSeries c = clean_trial(parked_trial({{0, 1}, {0.2, 1}, {0.4, 1}, {0.6, 1}, {0.8, 1}}, 10,
                                                 {true, true, true, true, true}),
                                    zones());
  EXPECT_EQ(c.samples[0].p, (std::array<double, 6>{1, 0, 0, 0, 0, 0}));
  EXPECT_FALSE(c.samples[0].red_occupied());
}

TEST(Pipeline, RedCountsAgainstAmber) {
  const CleanSeries c = clean_trial(parked_trial({{-1.5, -1.0}, {0, 1}, {0.2, 1}, {0.4, 1}, {0.6, 1}}, 5,
                                                 {true, true, true, true, true}),
                                    zones());
  EXPECT_TRUE(c.samples[0].red_occupied());
  EXPECT_TRUE(c.samples[0].amber_single());
  EXPECT_FALSE(c.samples[0].amber_critical());
}

TEST(Pipeline, StationaryRobotViolatesDensity) {
  // one of five robots parked 11 s outside the deposit, the rest moving
  const CleanSeries c = clean_trial(parked_trial({{0, 1}, {0.2, 1}, {0.4, 1}, {0.6, 1}, {0.8, 1}}, 550,
                                                 {false, true, true, true, true}),
                                    zones());
  EXPECT_FALSE(c.samples[100].density_violation());
  EXPECT_TRUE(c.samples[549].density_violation());
}

TEST(Pipeline, StationaryInDepositIsFine) {
  const CleanSeries c = clean_trial(parked_trial({{1.2, 0}, {0.2, 1}, {0.4, 1}, {0.6, 1}, {0.8, 1}}, 550,
                                                 {false, true, true, true, true}),
                                    zones());
  EXPECT_FALSE(c.samples[549].density_violation());
}

TEST(Pipeline, CountsMismatchIsSchemaError) {
  TrialOutput t = parked_trial({{0, 1}}, 3);
  t.state_counts[1] = {0, 1, 0, 0, 0, 0};
  EXPECT_THROW(clean_trial(t, zones()), SchemaError);
}

TEST(Pipeline, DownsampleKeepsEveryFiftiethAndOrsWindows) {
  CleanSeries s = flags_series(10000, 0.02, {503}, {}, {});
  const CleanSeries d = downsample_lf(s);
  ASSERT_EQ(d.samples.size(), 200U);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(d.samples[i].red_occupied(), i == 10) << i;
  EXPECT_DOUBLE_EQ(d.sample_period_s, 1.0);
  const CleanSeries quiet = downsample_lf(flags_series(10000, 0.02, {}, {}, {}));
  for (const auto& x : quiet.samples) EXPECT_FALSE(x.red_occupied() || x.amber_single() || x.density_violation());
}

TEST(Pipeline, DownsampleFoldsTrailingWindow) {
  const CleanSeries d = downsample(flags_series(120, 0.02, {119}, {}, {}), 50);
  ASSERT_EQ(d.samples.size(), 2U);
  EXPECT_TRUE(d.samples[1].red_occupied());
}

TEST(Pipeline, AverageTrials) {
  CleanSeries a = flags_series(2, 1.0, {0}, {}, {});
  CleanSeries b = flags_series(2, 1.0, {}, {}, {});
  a.samples[0].p = {1, 0, 0, 0, 0, 0};
  b.samples[0].p = {0, 1, 0, 0, 0, 0};
  const CleanSeries m = average_trials({a, b});
  EXPECT_DOUBLE_EQ(m.samples[0].p[0], 0.5);
  EXPECT_DOUBLE_EQ(m.samples[0].p[1], 0.5);
  EXPECT_TRUE(m.samples[0].red_occupied());
  EXPECT_DOUBLE_EQ(m.samples[0].freq[0], 0.5);
  const CleanSeries same = average_trials({a, a});
  EXPECT_EQ(same.samples[0].p, a.samples[0].p);
}

TEST(Pipeline, EwdExamples) {
  const std::vector<double> edges{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  EXPECT_EQ(level_for(edges, 0.43), 3);
  EXPECT_EQ(level_for(edges, 0.0), 1);
  EXPECT_EQ(level_for(edges, 1.0), 5);
  EXPECT_EQ(level_for(edges, 0.2), 2);
}

TEST(Pipeline, EwdMembershipProperty) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-3.0, 7.0);
  CleanSeries c;
  c.samples.resize(1000);
  for (int round = 0; round < 20; ++round) {
    for (auto& s : c.samples) s.p[0] = u(rng);
    const DiscreteSeries d = discretize_ewd(c, 5);
    const auto& e = d.edges[0];
    ASSERT_EQ(e.size(), 6U);
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const int l = d.samples[i].level[0];
      const double v = c.samples[i].p[0];
      ASSERT_GE(l, 1);
      ASSERT_LE(l, 5);
      EXPECT_GE(v, e[l - 1]);
      if (l < 5) EXPECT_LT(v, e[l]);
      else EXPECT_LE(v, e[l]);
    }
  }
}

TEST(Pipeline, EwdConstantChannelWarns) {
  CleanSeries c;
  c.samples.resize(10);
  for (auto& s : c.samples) s.p[0] = 0.3;
  const DiscreteSeries d = discretize_ewd(c, 5);
  for (const auto& s : d.samples) EXPECT_EQ(s.level[0], 1);
  EXPECT_FALSE(d.warnings.empty());
}

TEST(Pipeline, HfCampaignAndDepositOnly) {
  test::TempDir dir("hf");
  std::vector<CleanSeries> trials;
  for (int k = 0; k < 10; ++k) {
    std::string csv = "robot_id,t_s,x_m,y_m\n";
    for (int t = 0; t < 200; ++t) {
      for (int r = 0; r < 5; ++r) csv += fmt::format("{},{},{},{}\n", r, t, 1.1 + 0.1 * r, -1.0 + 0.01 * t);
    }
    const auto f = dir / fmt::format("hf_{}.csv", k);
    write_text_file(f, csv);
    trials.push_back(ingest_hf(f, zones()));
  }
  for (const auto& s : trials) {
    EXPECT_EQ(s.samples.size(), 200U);
    EXPECT_FALSE(s.states_available);
    for (const auto& x : s.samples) EXPECT_FALSE(x.red_occupied() || x.amber_single() || x.density_violation());
  }
}

TEST(Pipeline, HfRedOccupancyTime) {
  std::vector<PositionRecord> rec;
  for (int t = 0; t < 200; ++t) {
    rec.push_back({7, static_cast<double>(t), t < 46 ? Vec2{-1.2, -0.5} : Vec2{0.5, 0.5}});
  }
  const CleanSeries s = clean_positions(hf_trace(rec), zones(), Source::HF);
  EXPECT_DOUBLE_EQ(zone_time_stats({s}).red_s, 46.0);
}

TEST(Pipeline, HfOffGridTimestampRejected) {
  EXPECT_THROW(hf_trace({{1, 0.5, {0, 0}}}), SchemaError);
}

TEST(Pipeline, PhysicalNearestSample) {
  const std::vector<PositionRecord> rec{{3, 1.0, {0.1, 0.1}}, {3, 2.010, {0.2, 0.2}}, {3, 2.020, {0.3, 0.3}}};
  const PhysicalDownsample d = downsample_physical(rec, zones(), 4);
  ASSERT_TRUE(d.trace.at(2, 0).has_value());
  EXPECT_DOUBLE_EQ(d.trace.at(2, 0)->x, 0.2);
  EXPECT_TRUE(d.trace.at(1, 0).has_value());
  EXPECT_FALSE(d.trace.at(0, 0).has_value());
  EXPECT_FALSE(d.trace.at(3, 0).has_value());
}

TEST(Pipeline, PhysicalRegularInputIsFullyAvailable) {
  std::vector<PositionRecord> rec;
  for (int i = 0; i <= 20000; ++i) {
    for (long r : {1L, 2L}) rec.push_back({r, i * 0.01, {0.0, 0.0}});
  }
  const PhysicalDownsample d = downsample_physical(rec, zones(), 200);
  EXPECT_DOUBLE_EQ(d.availability.coverage, 1.0);
  EXPECT_EQ(d.availability.missing_entries, 0);
}

TEST(Pipeline, PhysicalReportsLongestGap) {
  std::vector<PositionRecord> rec;
  for (int i = 0; i <= 20000; ++i) {
    const double t = i * 0.01;
    rec.push_back({1, t, {0.0, 0.0}});
    if (t <= 50.0 + 1e-9 || t >= 72.8 - 1e-9) rec.push_back({2, t, {0.2, 0.0}});
  }
  const PhysicalDownsample d = downsample_physical(rec, zones(), 200);
  EXPECT_NEAR(d.availability.max_gap_s, 22.8, 1e-9);
  EXPECT_EQ(d.availability.max_gap_robot, 2);
  EXPECT_EQ(d.availability.missing_entries, 22);  // seconds 51..72 have no sample within 0.5 s
}

TEST(Pipeline, ZoneStatistics) {
  const auto idx = [](int n) { return range(n); };
  const CleanSeries s = flags_series(200, 1.0, idx(73), idx(44), idx(80));
  const ZoneTimeStats st = zone_time_stats({s, s});
  EXPECT_DOUBLE_EQ(st.red_s, 73.0);
  EXPECT_DOUBLE_EQ(st.amber_critical_s, 44.0);
  EXPECT_DOUBLE_EQ(st.amber_single_s, 80.0);
  EXPECT_EQ(st.trials, 2);
  const ZoneTimeStats zero = zone_time_stats({flags_series(200, 1.0, {}, {}, {})});
  EXPECT_EQ(zero.red_s + zero.amber_critical_s + zero.amber_single_s, 0.0);
}

TEST(Pipeline, ZoneStatisticsFromPositions) {
  const CleanSeries s =
      clean_positions(hf_trace(test::zone_occupancy_records(200, 73, 44, 80)), zones(), Source::PHYS);
  const ZoneTimeStats st = zone_time_stats({s});
  EXPECT_DOUBLE_EQ(st.red_s, 73.0);
  EXPECT_DOUBLE_EQ(st.amber_critical_s, 44.0);
  EXPECT_DOUBLE_EQ(st.amber_single_s, 80.0);
}

TEST(Pipeline, CleanAndDiscreteFileRoundTrip) {
  const CleanSeries c = test::synthetic_clean(30, {3, 11});
  const CleanSeries back = parse_clean_csv(clean_csv(c));
  ASSERT_EQ(back.samples.size(), c.samples.size());
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].flag, c.samples[i].flag);
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(back.samples[i].p[k], c.samples[i].p[k], 1e-12);
  }
  const DiscreteSeries d = discretize_ewd(c, 5);
  const DiscreteSeries d2 = parse_discrete(discrete_csv(d), bins_json(d));
  ASSERT_EQ(d2.samples.size(), d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) EXPECT_EQ(d2.samples[i].level, d.samples[i].level);
}

TEST(Pipeline, TamperedDiscreteLevelIsRejected) {
  const DiscreteSeries d = discretize_ewd(test::synthetic_clean(30, {}), 5);
  std::string text = discrete_csv(d);
  const auto pos = text.find('\n') + 1;
  const auto comma = text.find(',', pos) + 1;
  text[comma] = text[comma] == '5' ? '1' : '5';  // first sample, first level column
  EXPECT_THROW(parse_discrete(text, bins_json(d)), SchemaError);
}
