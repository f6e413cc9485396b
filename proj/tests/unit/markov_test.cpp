#include <gtest/gtest.h>

#include <algorithm>

#include <swarmvv/markov.hpp>

#include "test_support.hpp"

using namespace swarmvv;

namespace {

bool has(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Markov, StateIds) {
  EXPECT_EQ(model_state_id(BehaviourState::Searching), 1);
  EXPECT_EQ(model_state_id(BehaviourState::Dropoff), 4);
  for (BehaviourState s : kAllBehaviourStates) EXPECT_EQ(behaviour_from_model_id(model_state_id(s)), s);
}

TEST(Markov, UnrolledChainShape) {
  const MarkovModel m = build_model(test::synthetic_series(200, {}), BuildMode::PerStateChain);
  EXPECT_EQ(m.n_states(), 201);
  EXPECT_EQ(m.transitions.size(), 200U);
  EXPECT_EQ(m.absorbing, std::vector<int>{200});
  for (const auto& t : m.transitions) {
    EXPECT_EQ(t.to, t.from + 1);
    EXPECT_DOUBLE_EQ(t.rate, 1.0);
  }
  for (int i = 0; i < 200; ++i) {
    EXPECT_EQ(m.value(i, "timestep"), i);
    EXPECT_EQ(m.value(i, "s"), 1);
  }
  EXPECT_EQ(m.value(200, "l"), 0);
  EXPECT_TRUE(validate_model(m).empty());
}

TEST(Markov, RedFlagLabelsTimestep) {
  const MarkovModel m = build_model(test::synthetic_series(200, {11}), BuildMode::PerStateChain);
  const auto& red = m.labels.at("unsafe_red");
  ASSERT_EQ(red.size(), 1U);
  EXPECT_EQ(m.value(red[0], "timestep"), 11);
  EXPECT_EQ(m.labels.at("unsafe_fireexitsblocked"), red);
}

TEST(Markov, SingleSample) {
  const MarkovModel m = build_model(test::synthetic_series(1, {}), BuildMode::PerStateChain);
  EXPECT_EQ(m.n_states(), 2);
  EXPECT_EQ(m.transitions.size(), 1U);
  EXPECT_TRUE(validate_model(m).empty());
}

TEST(Markov, LevelsAndRewardsFollowSeries) {
  const DiscreteSeries d = test::synthetic_series(50, {});
  const MarkovModel m = build_model(d, BuildMode::PerStateChain, BehaviourState::AvoidanceS);
  EXPECT_EQ(m.value(0, "s"), model_state_id(BehaviourState::AvoidanceS));
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(m.value(i, "l"), d.samples[i].level[static_cast<int>(BehaviourState::AvoidanceS)]);
    const auto& p = d.samples[i].p;
    EXPECT_NEAR(m.rewards.at("main_states")[i], p[0] + p[1] + p[2], 1e-12);
    EXPECT_NEAR(m.rewards.at("avoidance_states")[i], p[3] + p[4] + p[5], 1e-12);
  }
  EXPECT_EQ(m.rewards.at("main_states")[50], 0.0);
}

TEST(Markov, JointModeCarriesAllChannels) {
  const DiscreteSeries d = test::synthetic_series(20, {});
  const MarkovModel m = build_model(d, BuildMode::Joint);
  for (BehaviourState s : kAllBehaviourStates) {
    EXPECT_GE(m.variable_index(std::string("l_") + channel_name(s)), 0);
  }
  EXPECT_GE(m.variable_index("timestep"), 0);
  EXPECT_EQ(m.n_states(), 21);
}

TEST(Markov, ExportImportRoundTrip) {
  const MarkovModel m = build_model(test::synthetic_series(40, {3, 17}), BuildMode::PerStateChain);
  const std::string text = export_model(m);
  EXPECT_EQ(text.rfind("swarmvv-ctmc 1\n", 0), 0U);
  EXPECT_EQ(import_model(text), m);
  test::TempDir dir("model");
  save_model(m, dir / "m.ctmc");
  EXPECT_EQ(load_model(dir / "m.ctmc"), m);
}

TEST(Markov, RandomModelsRoundTrip) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    MarkovModel m = test::to_model(test::random_ctmc(rng));
    m.rewards["r"][0] = 1.0 / 3.0;
    EXPECT_EQ(import_model(export_model(m)), m);
  }
}

TEST(Markov, EmptyLabelSection) {
  MarkovModel m = test::model_from_rates({{0, 1}, {0, 0}});
  const std::string text = export_model(m);
  EXPECT_NE(text.find("LABELS 0"), std::string::npos);
  EXPECT_EQ(import_model(text), m);
}

TEST(Markov, ValidationDiagnostics) {
  MarkovModel ok = test::model_from_rates({{0, 1}, {0, 0}});
  EXPECT_TRUE(validate_model(ok).empty());

  MarkovModel zero = ok;
  zero.transitions[0].rate = 0.0;
  EXPECT_TRUE(mentions(validate_model(zero), "non-positive rate"));

  MarkovModel dangling = ok;
  dangling.labels["goal"] = {5};
  EXPECT_TRUE(mentions(validate_model(dangling), "label goal references missing state"));

  MarkovModel stuck = ok;
  stuck.absorbing.clear();
  EXPECT_TRUE(mentions(validate_model(stuck), "no outgoing transition"));

  MarkovModel range = ok;
  range.variables[0].hi = 0;
  EXPECT_TRUE(mentions(validate_model(range), "outside"));

  MarkovModel rewards = ok;
  rewards.rewards["r"] = {1.0};
  EXPECT_FALSE(validate_model(rewards).empty());
}

TEST(Markov, ImportRejectsMalformedText) {
  EXPECT_THROW(import_model("not a model\n"), ModelError);
  const MarkovModel m = test::model_from_rates({{0, 1}, {0, 0}});
  std::string text = export_model(m);
  EXPECT_THROW(import_model(text.substr(0, text.size() / 2)), ModelError);
  std::string bad = text;
  bad.replace(bad.find("0 1 1"), 5, "0 1 0");
  EXPECT_THROW(import_model(bad), ModelError);
}

TEST(Markov, LabelMembership) {
  const MarkovModel m = build_model(test::synthetic_series(30, {0, 29}), BuildMode::PerStateChain);
  const auto& red = m.labels.at("unsafe_red");
  EXPECT_TRUE(has(red, 0));
  EXPECT_TRUE(has(red, 29));
  EXPECT_FALSE(has(red, 30));
}
