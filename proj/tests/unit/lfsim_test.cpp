#include <gtest/gtest.h>

#include <numeric>

#include <swarmvv/csv.hpp>
#include <swarmvv/lfsim.hpp>

#include "test_support.hpp"

using namespace swarmvv;

namespace {

const TrialOutput& smoke_trial() {
  static const TrialOutput t = [] {
    const ScenarioConfig c = smoke_scenario();
    return run_trial(c, build_zone_map(c), 11);
  }();
  return t;
}

}  // namespace

TEST(LfSim, CountsAreConservedAndMatchStates) {
  const TrialOutput& t = smoke_trial();
  ASSERT_EQ(t.n_steps, 1000);
  ASSERT_EQ(t.state_counts.size(), 1000U);
  for (int k = 0; k < t.n_steps; ++k) {
    const auto& c = t.state_counts[k];
    EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0), 5);
    std::array<int, kNumBehaviourStates> from_states{};
    for (int r = 0; r < t.n_robots; ++r) ++from_states[static_cast<int>(t.state(k, r))];
    EXPECT_EQ(from_states, c);
  }
}

TEST(LfSim, SpeedBoundAndContainment) {
  const TrialOutput& t = smoke_trial();
  const ScenarioConfig c = smoke_scenario();
  const Rect arena = c.arena();
  const double max_speed = c.robot_max_speed_cm_s / 100.0;
  for (double v : t.speeds) EXPECT_LE(v, max_speed + 1e-9);
  for (const Vec2& p : t.positions) EXPECT_TRUE(arena.contains(p)) << p.x << "," << p.y;
}

TEST(LfSim, OnlyControllerTransitions) {
  const TrialOutput& t = smoke_trial();
  for (int k = 1; k < t.n_steps; ++k) {
    for (int r = 0; r < t.n_robots; ++r) {
      EXPECT_TRUE(is_legal_transition(t.state(k - 1, r), t.state(k, r)))
          << to_string(t.state(k - 1, r)) << " -> " << to_string(t.state(k, r)) << " at " << k;
    }
  }
}

TEST(LfSim, NoOverlapBetweenRobots) {
  const TrialOutput& t = smoke_trial();
  const double d = smoke_scenario().robot_diameter_cm / 100.0;
  for (int k = 0; k < t.n_steps; k += 7) {
    for (int a = 0; a < t.n_robots; ++a) {
      for (int b = a + 1; b < t.n_robots; ++b) {
        EXPECT_GE(norm(t.position(k, a) - t.position(k, b)), d - 1e-9);
      }
    }
  }
}

TEST(LfSim, DeterministicPerSeed) {
  const ScenarioConfig c = smoke_scenario();
  const ZoneMap z = build_zone_map(c);
  const TrialOutput a = run_trial(c, z, 5);
  const TrialOutput b = run_trial(c, z, 5);
  const TrialOutput other = run_trial(c, z, 6);
  EXPECT_EQ(a.positions.size(), b.positions.size());
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.positions.size(); ++i) {
    same = same && a.positions[i].x == b.positions[i].x && a.positions[i].y == b.positions[i].y;
    differs = differs || a.positions[i].x != other.positions[i].x;
  }
  EXPECT_TRUE(same);
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.robot_states, b.robot_states);
}

TEST(LfSim, NoCarriersMeansNoPickupOrDropoff) {
  ScenarioConfig c = smoke_scenario();
  c.n_carriers = 0;
  const TrialOutput t = run_trial(c, build_zone_map(c), 3);
  for (const auto& row : t.state_counts) {
    EXPECT_EQ(row[static_cast<int>(BehaviourState::Pickup)], 0);
    EXPECT_EQ(row[static_cast<int>(BehaviourState::Dropoff)], 0);
    EXPECT_EQ(row[static_cast<int>(BehaviourState::AvoidanceP)], 0);
    EXPECT_EQ(row[static_cast<int>(BehaviourState::AvoidanceD)], 0);
  }
}

TEST(LfSim, SingleRobotSearchesUntilWall) {
  ScenarioConfig c = smoke_scenario();
  c.n_carriers = 0;
  c.n_robots = 1;
  const TrialOutput t = run_trial(c, build_zone_map(c), 9);
  EXPECT_EQ(t.state(0, 0), BehaviourState::Searching);
  bool avoided = false;
  for (int k = 0; k < t.n_steps; ++k) {
    const BehaviourState s = t.state(k, 0);
    EXPECT_TRUE(s == BehaviourState::Searching || s == BehaviourState::AvoidanceS);
    if (s == BehaviourState::AvoidanceS && !avoided) {
      avoided = true;
      const Vec2 p = t.position(k, 0);
      const Rect a = c.arena();
      const double wall = std::min({p.x - a.x_min, a.x_max - p.x, p.y - a.y_min, a.y_max - p.y});
      EXPECT_LT(wall, c.ir_range_cm / 100.0);
    }
  }
}

TEST(LfSim, CsvRoundTrip) {
  test::TempDir dir("trial");
  const TrialOutput& t = smoke_trial();
  write_trial_csv(t, dir.path());
  for (const char* f : {"counts.csv", "states.csv", "positions.csv", "kinematics.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const TrialOutput back = read_trial_csv(dir.path());
  EXPECT_EQ(back.n_steps, t.n_steps);
  EXPECT_EQ(back.state_counts, t.state_counts);
  EXPECT_EQ(back.robot_states, t.robot_states);
  for (std::size_t i = 0; i < t.positions.size(); ++i) {
    EXPECT_NEAR(back.positions[i].x, t.positions[i].x, 5e-5 + 1e-12);
    EXPECT_NEAR(back.positions[i].y, t.positions[i].y, 5e-5 + 1e-12);
  }
}

TEST(LfSim, CampaignLayoutAndByteIdenticalReruns) {
  test::TempDir dir("campaign");
  const ScenarioConfig c = smoke_scenario();
  const CampaignSummary a = run_campaign(c, 3, 42, dir / "a");
  const CampaignSummary b = run_campaign(c, 3, 42, dir / "b", {false, 2});
  const auto trials = campaign_trial_dirs(dir / "a");
  ASSERT_EQ(trials.size(), 3U);
  for (const auto& d : trials) {
    for (const char* f : {"counts.csv", "states.csv", "positions.csv", "kinematics.csv"}) {
      EXPECT_EQ(read_text_file(d / f), read_text_file(dir / "b" / d.filename() / f));
    }
  }
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].checksum, b.trials[i].checksum);
    EXPECT_EQ(a.trials[i].seed, 42 + i);
  }
}

TEST(LfSim, CampaignRefusesExistingDirectoryWithoutForce) {
  test::TempDir dir("campaign");
  const ScenarioConfig c = smoke_scenario();
  run_campaign(c, 1, 1, dir / "x");
  EXPECT_THROW(run_campaign(c, 1, 1, dir / "x"), CampaignError);
  EXPECT_NO_THROW(run_campaign(c, 1, 1, dir / "x", {true, 1}));
}

TEST(LfSim, CorruptTrialDirectoryIsReported) {
  test::TempDir dir("bad");
  const TrialOutput& t = smoke_trial();
  write_trial_csv(t, dir.path());
  write_text_file(dir / "counts.csv", "t,searching\n0,5\n");
  EXPECT_THROW(read_trial_csv(dir.path()), std::runtime_error);
}
