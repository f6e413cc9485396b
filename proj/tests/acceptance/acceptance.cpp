// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <thread>

#include <fmt/core.h>

#include <swarmvv/checker.hpp>
#include <swarmvv/csv.hpp>
#include <swarmvv/lfsim.hpp>
#include <swarmvv/macro.hpp>
#include <swarmvv/pipeline.hpp>

#include "swarmvv_cli/stages.hpp"
#include "test_support.hpp"

using namespace swarmvv;


namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

int jobs() { return static_cast<int>(std::max(1U, std::thread::hardware_concurrency())); }

CheckResult eval(const MarkovModel& m, const std::string& text, const Defines& d = {}) {
  return Checker(m).check(swarmvv::bind(parse_property(text), m, d));
}

// ---------------------------------------------------------------------------

Verdict checker_numerics() {
  constexpr int kChains = 50;
  constexpr long kRuns = 1000000;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261018);
  std::vector<test::RandomCtmc> chains;
  for (int i = 0; i < kChains; ++i) chains.push_back(test::random_ctmc(rng, 8));

  struct Row {
    double reach = 0, reward = 0, reach_expm = 0, reward_expm = 0;
    test::McPair mc;
  };
  std::vector<Row> rows(kChains);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < kChains; i = next++) {
      const auto& c = chains[i];
      const MarkovModel m = test::to_model(c);
      const Defines d{{"T", c.t}};
      rows[i].reach = eval(m, R"(P=? [ F<=T "goal" ])", d).value;
      rows[i].reward = eval(m, R"(R{"r"}=? [ C<=T ])", d).value;
      rows[i].reach_expm = test::expm_bounded_reach(c);
      rows[i].reward_expm = test::expm_cumulative_reward(c);
      rows[i].mc = test::monte_carlo(c, kRuns, 1000 + i);
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs(); ++t) pool.emplace_back(worker);
  }

  Verdict v;
  double worst_expm = 0.0, worst_z = 0.0;
  // A run where every trajectory agrees has zero sample variance; fall back
  // to the binomial standard error under the checker's value.
  auto effective_se = [](double value, const test::McEstimate& e, bool binomial) {
    if (e.se > 0.0 || !binomial) return e.se;
    return std::sqrt(std::max(0.0, value * (1.0 - value)) / kRuns);
  };
  auto within_se = [](double value, const test::McEstimate& e, double se) {
    if (se == 0.0) return std::abs(value - e.mean) <= 1e-9;
    return std::abs(value - e.mean) <= 3.0 * se;
  };
  for (int i = 0; i < kChains; ++i) {
    const Row& r = rows[i];
    const double de = std::max(std::abs(r.reach - r.reach_expm), std::abs(r.reward - r.reward_expm));
    worst_expm = std::max(worst_expm, de);
    v.require(de <= 1e-6, fmt::format("chain {}: expm difference {:.3g}", i, de));
    for (const auto& [value, est, what, binomial] :
         {std::tuple{r.reach, r.mc.reach, "F<=T", true}, {r.reward, r.mc.reward, "C<=T", false}}) {
      const double se = effective_se(value, est, binomial);
      if (se > 0) worst_z = std::max(worst_z, std::abs(value - est.mean) / se);
      v.require(within_se(value, est, se), fmt::format("chain {} {}: checker {:.9f} vs Monte-Carlo {:.9f} (se {:.2g})",
                                                       i, what, value, est.mean, se));
    }
  }
  const double elapsed = seconds_since(t0);
  v.require(elapsed < 300.0, fmt::format("runtime {:.0f} s exceeds 5 min", elapsed));
  if (v.pass) {
    v.detail = fmt::format("{} chains, max |checker - expm| {:.2g}, max Monte-Carlo z {:.2f}, {:.1f} s", kChains,
                           worst_expm, worst_z, elapsed);
  }
  return v;
}

Verdict analytic_spot_checks() {
  MarkovModel m = test::model_from_rates({{0, 1}, {0, 0}});
  m.labels["goal"] = {1};
  m.rewards["r"] = {1.0, 0.0};
  const double expected = 1.0 - std::exp(-1.0);
  const double f = eval(m, R"(P=? [ F<=1 "goal" ])").value;
  const double c = eval(m, R"(R{"r"}=? [ C<=1 ])").value;
  Verdict v;
  v.require(std::abs(f - expected) <= 1e-6, fmt::format("F<=1 = {}", f));
  v.require(std::abs(c - expected) <= 1e-6, fmt::format("C<=1 = {}", c));
  if (v.pass) v.detail = fmt::format("F<=1 = {:.9f}, C<=1 = {:.9f}, 1 - e^-1 = {:.9f}", f, c, expected);
  return v;
}

/// The 100-trial LF campaign shared by several criteria.
struct LfRun {
  fs::path campaign;
  cli::SourceSeries series;
  DiscreteSeries discrete;
  MarkovModel model;
  double seconds = 0.0;
  std::string error;
};

LfRun& lf_run(const fs::path& root) {
  static LfRun run = [&] {
    LfRun r;
    const auto t0 = Clock::now();
    try {
      const ScenarioConfig cfg = default_scenario();
      r.campaign = root / "campaign";
      run_campaign(cfg, 100, 7, r.campaign, {true, jobs()});
      r.series = cli::clean_lf_campaign(r.campaign, build_zone_map(cfg), 50, jobs());
      r.discrete = discretize_ewd(r.series.averaged, 5);
      r.model = build_model(r.discrete, BuildMode::PerStateChain, BehaviourState::Searching);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Verdict lf_red_zone(const fs::path& root) {
  const auto t0 = Clock::now();
  LfRun& r = lf_run(root);
  Verdict v;
  if (!r.error.empty()) {
    v.require(false, r.error);
    return v;
  }
  const auto ex = run_experiment(r.model, parse_property(R"(P=? [ F<=T "unsafe_red" ])"), parse_sweep("T=0:10:200"));
  const double at200 = ex.results.back().value;
  v.require(at200 > 0.0, fmt::format("P[F<=200 unsafe_red] = {}", at200));
  for (std::size_t i = 1; i < ex.results.size(); ++i) {
    v.require(ex.results[i].value >= ex.results[i - 1].value - 1e-12,
              fmt::format("decreases between T={} and T={}", ex.points[i - 1], ex.points[i]));
  }
  const double elapsed = r.seconds + seconds_since(t0);
  v.require(elapsed < 600.0, fmt::format("runtime {:.0f} s exceeds 10 min", elapsed));
  if (v.pass) {
    v.detail = fmt::format("P[F<=200 unsafe_red] = {:.6f}, nondecreasing over {} points, {:.1f} s", at200,
                           ex.points.size(), elapsed);
  }
  return v;
}

Verdict avoidance_over_main(const fs::path& root) {
  LfRun& r = lf_run(root);
  Verdict v;
  if (!r.error.empty()) {
    v.require(false, r.error);
    return v;
  }
  const double avoid = eval(r.model, R"(R{"avoidance_states"}=? [ C<=200 ])").value;
  const double main = eval(r.model, R"(R{"main_states"}=? [ C<=200 ])").value;
  v.require(avoid > main, fmt::format("avoidance {:.4f} <= main {:.4f}", avoid, main));
  if (v.pass) v.detail = fmt::format("avoidance {:.4f} > main {:.4f}", avoid, main);
  return v;
}

Verdict counterexample_contract() {
  const MarkovModel m = build_model(test::synthetic_series(200, {11, 57, 120}), BuildMode::PerStateChain);
  const CheckResult r = eval(m, R"(A [ G !"unsafe_red" ])");
  Verdict v;
  v.require(r.kind == CheckResult::Kind::Trace && !r.holds, "invariant did not evaluate to false");
  v.require(r.trace.size() == 12, fmt::format("trace has {} states", r.trace.size()));
  if (!r.trace.empty()) {
    v.require(m.value(r.trace.back(), "timestep") == 11, "trace does not end at timestep 11");
    v.require(r.trace.front() == m.initial, "trace does not start at the initial state");
  }
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    const bool edge = std::any_of(m.transitions.begin(), m.transitions.end(), [&](const Transition& t) {
      return t.from == r.trace[i - 1] && t.to == r.trace[i] && t.rate > 0;
    });
    v.require(edge, fmt::format("step {} is not a transition", i));
  }
  if (v.pass) v.detail = "false, 12-state trace ending at timestep 11";
  return v;
}

Verdict filter_contract(const fs::path& root) {
  Verdict v;
  std::vector<int> red;
  for (int k = 1; k <= 14; ++k) red.push_back(13 * k);
  const MarkovModel syn = build_model(test::synthetic_series(200, red), BuildMode::PerStateChain);
  const auto count = eval(syn, R"(filter(count, P=? [ X "unsafe_red" ]))");
  const auto sum = eval(syn, R"(filter(sum, P=? [ X "unsafe_red" ]))");
  const auto avg = eval(syn, R"(filter(avg, P=? [ X "unsafe_red" ]))");
  v.require(count.count == 14, fmt::format("synthetic count {}", count.count));
  v.require(sum.sum == 14.0, fmt::format("synthetic sum {}", sum.sum));
  v.require(avg.avg && std::abs(*avg.avg - sum.sum / count.count) < 1e-12, "synthetic avg is not sum/count");

  LfRun& r = lf_run(root);
  if (!r.error.empty()) {
    v.require(false, r.error);
    return v;
  }
  const auto lc = eval(r.model, R"(filter(count, P=? [ X "unsafe_red" ]))");
  const auto ls = eval(r.model, R"(filter(sum, P=? [ X "unsafe_red" ]))");
  const auto la = eval(r.model, R"(filter(avg, P=? [ X "unsafe_red" ]))");
  const auto lp = eval(r.model, R"(filter(print, P=? [ X "unsafe_red" ]))");
  v.require(lc.count == static_cast<long>(lp.printed.size()), "LF count differs from printed states");
  if (la.avg) {
    v.require(std::abs(*la.avg * lc.count - ls.sum) <= 1e-9, "LF avg*count differs from sum");
  } else {
    v.require(lc.count == 0 && ls.sum == 0.0, "LF avg undefined with satisfying states");
  }
  if (v.pass) {
    v.detail = fmt::format("synthetic 14/14/{}; regenerated LF {}/{}/{}", avg.text(), lc.text(), ls.text(), la.text());
  }
  return v;
}

// Agent-level simulation of the population model's per-robot machine.
struct Agent {
  bool avoiding = false;
  int chain = 0;  // 0 searching, 1 pickup, 2 dropoff
  int m = 0;      // sojourn in the main state (avoidance: sojourn before entering)
  int j = 0;      // avoidance sojourn
};

void agent_step(Agent& a, const MacroParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int T = p.t_s;
  const auto cap = [T](int i) { return std::min(i, T - 1); };
  if (a.avoiding) {
    if (a.j == T - 1) {
      a = {false, a.chain, cap(a.m + 1), 0};
    } else {
      a = {true, a.chain, cap(a.m + 1), a.j + 1};
    }
    return;
  }
  if (a.chain == 2 && a.m == T - 1) {
    a = {false, 0, 0, 0};
    return;
  }
  if (u(rng) < p.p_a) {
    a = {true, a.chain, a.m, 0};
    return;
  }
  const double advance = a.chain == 0 ? p.p_s : (a.chain == 1 ? p.p_p : 0.0);
  if (u(rng) < advance) {
    a = {false, a.chain + 1, 0, 0};
  } else {
    a.m = cap(a.m + 1);
  }
}

Verdict macro_model() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const MacroParams p{u(rng), u(rng), u(rng), 1 + static_cast<int>(u(rng) * 10), 5};
    PopulationVector pop(p.t_s);
    double total = 0.0;
    for (double& x : pop.data()) {
      x = u(rng) < 0.5 ? u(rng) : 0.0;
      total += x;
    }
    for (int k = 0; k < 500; ++k) {
      pop = step(pop, p);
      worst = std::max(worst, std::abs(pop.total() - total));
    }
  }
  v.require(worst < 1e-9, fmt::format("conservation drift {:.3g}", worst));
  const double conservation_s = seconds_since(t0);

  constexpr int kAgents = 100000;
  constexpr int kSteps = 25;
  double worst_z = 0.0, sum_z2 = 0.0;
  int cells = 0, beyond = 0;
  for (int set = 0; set < 5; ++set) {
    const MacroParams p{0.05 + 0.5 * u(rng), 0.05 + 0.5 * u(rng), 0.05 + 0.4 * u(rng), 2 + static_cast<int>(u(rng) * 7),
                        5};
    const auto traj = evolve(PopulationVector::all_searching(p.t_s, p.n), p, kSteps);
    std::vector<Agent> agents(kAgents);
    std::mt19937_64 agent_rng(9000 + set);
    for (int k = 0; k <= kSteps; ++k) {
      if (k > 0) {
        for (auto& a : agents) agent_step(a, p, agent_rng);
      }
      std::array<double, kNumBehaviourStates> counts{};
      for (const auto& a : agents) ++counts[a.chain + (a.avoiding ? 3 : 0)];
      const auto mean_field = traj[k].aggregate();
      for (int s = 0; s < kNumBehaviourStates; ++s) {
        const double prob = mean_field[s] / p.n;
        const double freq = counts[s] / kAgents;
        const double se = std::sqrt(std::max(0.0, prob * (1.0 - prob)) / kAgents);
        const bool ok = se == 0.0 ? std::abs(freq - prob) < 1e-9 : std::abs(freq - prob) <= 3.0 * se;
        if (se > 0.0) {
          const double z = std::abs(freq - prob) / se;
          worst_z = std::max(worst_z, z);
          sum_z2 += z * z;
          ++cells;
          beyond += z > 3.0 ? 1 : 0;
        }
        v.require(ok, fmt::format("set {} step {} state {}: agents {:.5f} vs mean field {:.5f} (se {:.2g})", set, k,
                                  channel_name(kAllBehaviourStates[s]), freq, prob, se));
      }
    }
  }
  const std::string calibration =
      fmt::format("{} of {} cells beyond 3 se, mean z^2 {:.3f}, max z {:.2f}", beyond, cells, sum_z2 / cells, worst_z);
  if (v.pass) {
    v.detail = fmt::format("10^4 x 500 steps drift {:.2g} ({:.1f} s); 10^5 agents x {} steps x 5 sets, {}", worst,
                           conservation_s, kSteps, calibration);
  } else {
    v.detail += "; " + calibration;
  }
  return v;
}

Verdict pipeline_exactness(const fs::path& root) {
  Verdict v;
  LfRun& r = lf_run(root);
  if (!r.error.empty()) {
    v.require(false, r.error);
    return v;
  }
  const ZoneMap zones = build_zone_map(default_scenario());
  int checked = 0;
  for (const auto& dir : campaign_trial_dirs(r.campaign)) {
    const TrialOutput t = read_trial_csv(dir);
    try {
      const CleanSeries c = clean_trial(t, zones);
      for (int k = 0; k < t.n_steps; ++k) {
        for (int s = 0; s < kNumBehaviourStates; ++s) {
          if (std::abs(c.samples[k].p[s] * t.n_robots - t.state_counts[k][s]) > 1e-9) {
            v.require(false, fmt::format("{} step {}: probabilities disagree with counts", dir.filename().string(), k));
          }
        }
      }
      ++checked;
    } catch (const std::exception& e) {
      v.require(false, dir.filename().string() + ": " + e.what());
    }
  }

  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CleanSeries values;
  values.samples.resize(100000);
  for (auto& s : values.samples) s.p[2] = u(rng);
  const DiscreteSeries d = discretize_ewd(values, 5);
  const auto& e = d.edges[2];
  long bad = 0;
  for (std::size_t i = 0; i < values.samples.size(); ++i) {
    const int l = d.samples[i].level[2];
    const double x = values.samples[i].p[2];
    const bool ok = l >= 1 && l <= 5 && x >= e[l - 1] && (l == 5 ? x <= e[l] : x < e[l]);
    bad += ok ? 0 : 1;
  }
  v.require(bad == 0, fmt::format("{} of 10^5 values outside their bin", bad));

  const std::vector<PositionRecord> near{{1, 2.010, {0.1, 0.0}}, {1, 2.020, {0.2, 0.0}}};
  const PhysicalDownsample nd = downsample_physical(near, zones, 3);
  v.require(nd.trace.at(2, 0) && nd.trace.at(2, 0)->x == 0.1, "second 2 did not take the 2.010 s sample");

  test::TempDir dir("gap");
  std::string csv = "robot_id,t_s,x_m,y_m\n";
  for (int i = 0; i <= 20000; ++i) {
    const double t = i * 0.01;
    csv += fmt::format("1,{:.2f},0.0,0.0\n", t);
    if (t <= 100.0 + 1e-9 || t >= 122.8 - 1e-9) csv += fmt::format("2,{:.2f},0.3,0.0\n", t);
  }
  write_text_file(dir / "gap.csv", csv);
  const PhysicalDownsample gd = downsample_physical(dir / "gap.csv", zones, 200);
  v.require(std::abs(gd.availability.max_gap_s - 22.8) < 1e-9,
            fmt::format("max gap {} s", gd.availability.max_gap_s));
  if (v.pass) {
    v.detail = fmt::format("{} trials consistent; 10^5 EWD values binned; 2.010 s chosen; max gap {:.1f} s", checked,
                           gd.availability.max_gap_s);
  }
  return v;
}

Verdict zone_statistics() {
  const ZoneMap zones = build_zone_map(default_scenario());
  const CleanSeries s =
      clean_positions(hf_trace(test::zone_occupancy_records(200, 73, 44, 80)), zones, Source::PHYS);
  const ZoneTimeStats st = zone_time_stats({s});
  Verdict v;
  v.require(st.red_s == 73.0 && st.amber_critical_s == 44.0 && st.amber_single_s == 80.0,
            fmt::format("got ({}, {}, {})", st.red_s, st.amber_critical_s, st.amber_single_s));
  if (v.pass) v.detail = fmt::format("({}, {}, {}) s", st.red_s, st.amber_critical_s, st.amber_single_s);
  return v;
}

Verdict golden_properties(const fs::path& root) {
  const std::vector<std::string> golden{
      R"(P=? [ F<=T "unsafe_fireexitsblocked" ])",
      R"(P=? [ F<=T "unsafe_amber_critical" ])",
      R"(P=? [ F<=T "unsafe_amber" ])",
      R"(filter(sum, P=? [ X "unsafe_red" ]))",
      R"(filter(avg, P=? [ X "unsafe_red" ]))",
      R"(R{"main_states"}=? [C<=T])",
      R"(R{"avoidance_states"}=? [C<=T])",
      R"(P=? [ F<=T (s=state&l=level&timestep=T) ])",
      R"(P=? [ F[0,99] (s=1&l>=3) ])",
      R"(P=? [ F[100,199] (s=4&l>=3) ])",
      R"(P>=0.25 [ s=4 U<=99.0 s=1 ])",
  };
  Verdict v;
  LfRun& r = lf_run(root);
  if (!r.error.empty()) {
    v.require(false, r.error);
    return v;
  }
  const Defines d = cli::default_defines(r.model);
  const Checker checker(r.model);
  for (const auto& text : golden) {
    try {
      const CheckResult res = checker.check(swarmvv::bind(parse_property(text), r.model, d));
      v.require(std::isfinite(res.scalar()), text + " evaluated to a non-finite value");
    } catch (const std::exception& e) {
      v.require(false, text + ": " + e.what());
    }
  }
  if (v.pass) v.detail = fmt::format("{} properties parsed, bound and evaluated", golden.size());
  return v;
}

}  // namespace

int main() {
  test::TempDir root("acceptance");
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "checker numerical correctness", checker_numerics},
      {2, "analytic spot checks", analytic_spot_checks},
      {3, "LF red-zone reachability", [&] { return lf_red_zone(root.path()); }},
      {4, "avoidance rewards exceed main rewards", [&] { return avoidance_over_main(root.path()); }},
      {5, "counterexample contract", counterexample_contract},
      {6, "filter contract", [&] { return filter_contract(root.path()); }},
      {7, "macroscopic model", macro_model},
      {8, "pipeline exactness", [&] { return pipeline_exactness(root.path()); }},
      {9, "zone statistics", zone_statistics},
      {10, "golden properties", [&] { return golden_properties(root.path()); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failed += v.pass ? 0 : 1;
    std::cout << fmt::format("criterion {:>2} {} {}: {}\n", c.id, v.pass ? "PASS" : "FAIL", c.name, v.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
