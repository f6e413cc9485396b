#include "swarmvv_cli/stages.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <fmt/core.h>
#include <json.hpp>

#include <swarmvv/csv.hpp>
#include <swarmvv/lfsim.hpp>

namespace swarmvv::cli {

using json = nlohmann::json;

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(n, 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ZoneTimeStats mean_stats(const std::vector<ZoneTimeStats>& per_trial) {
  ZoneTimeStats st;
  st.trials = static_cast<int>(per_trial.size());
  for (const auto& s : per_trial) {
    st.red_s += s.red_s;
    st.amber_critical_s += s.amber_critical_s;
    st.amber_single_s += s.amber_single_s;
  }
  if (st.trials > 0) {
    st.red_s /= st.trials;
    st.amber_critical_s /= st.trials;
    st.amber_single_s /= st.trials;
  }
  return st;
}

void prefix_warnings(std::vector<std::string>& out, const std::string& origin, const std::vector<std::string>& w) {
  for (const auto& x : w) out.push_back(origin + ": " + x);
}

}  // namespace

SourceSeries clean_lf_campaign(const fs::path& campaign_dir, const ZoneMap& zones, int stride, int jobs) {
  const auto dirs = campaign_trial_dirs(campaign_dir);
  if (dirs.empty()) throw SchemaError("campaign " + campaign_dir.string() + " has no trial directories");
  std::vector<CleanSeries> sampled(dirs.size());
  std::vector<ZoneTimeStats> stats(dirs.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t i) {
    const CleanSeries full = clean_trial(read_trial_csv(dirs[i]), zones);
    stats[i] = zone_time_stats({full});
    sampled[i] = stride > 1 ? downsample(full, stride) : full;
  });
  SourceSeries out;
  for (std::size_t i = 0; i < dirs.size(); ++i) prefix_warnings(out.warnings, dirs[i].filename().string(), sampled[i].warnings);
  out.averaged = average_trials(sampled);
  out.stats = mean_stats(stats);
  return out;
}

SourceSeries ingest_hf_files(const std::vector<fs::path>& files, const ZoneMap& zones) {
  if (files.empty()) throw SchemaError("no HF-format files given");
  std::vector<CleanSeries> series;
  SourceSeries out;
  for (const auto& f : files) {
    series.push_back(ingest_hf(f, zones));
    prefix_warnings(out.warnings, f.filename().string(), series.back().warnings);
  }
  out.stats = zone_time_stats(series);
  out.averaged = average_trials(series);
  return out;
}

PhysSeries downsample_phys_files(const std::vector<fs::path>& files, const ZoneMap& zones, int duration_s) {
  if (files.empty()) throw SchemaError("no physical-format files given");
  PhysSeries out;
  std::vector<CleanSeries> series;
  for (const auto& f : files) {
    out.trials.push_back(downsample_physical(f, zones, duration_s));
    series.push_back(out.trials.back().series);
    prefix_warnings(out.source.warnings, f.filename().string(), series.back().warnings);
  }
  out.source.stats = zone_time_stats(series);
  out.source.averaged = average_trials(series);
  return out;
}

std::string stats_json(const ZoneTimeStats& stats, Source source) {
  json j{{"source", to_string(source)},
         {"trials", stats.trials},
         {"red_s", stats.red_s},
         {"amber_critical_s", stats.amber_critical_s},
         {"amber_single_s", stats.amber_single_s}};
  return j.dump(2) + "\n";
}

ZoneTimeStats parse_stats_json(const std::string& text) {
  const json j = json::parse(text);
  ZoneTimeStats st;
  st.trials = j.at("trials").get<int>();
  st.red_s = j.at("red_s").get<double>();
  st.amber_critical_s = j.at("amber_critical_s").get<double>();
  st.amber_single_s = j.at("amber_single_s").get<double>();
  return st;
}

std::string availability_json(const std::vector<fs::path>& files, const std::vector<PhysicalDownsample>& trials) {
  json arr = json::array();
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& a = trials[i].availability;
    json gaps = json::object();
    for (std::size_t r = 0; r < a.per_robot_max_gap_s.size(); ++r) {
      gaps[std::to_string(trials[i].trace.robot_ids[r])] = a.per_robot_max_gap_s[r];
    }
    arr.push_back({{"file", files[i].filename().string()},
                   {"coverage", a.coverage},
                   {"max_gap_s", a.max_gap_s},
                   {"max_gap_robot", a.max_gap_robot},
                   {"missing_entries", a.missing_entries},
                   {"per_robot_max_gap_s", gaps}});
  }
  return json{{"trials", arr}}.dump(2) + "\n";
}

const std::string& default_property_pack() {
  static const std::string pack = R"(// Fire exit requirement: red and amber zone entry within T sampled steps
fire_exit_red: P=? [ F<=T "unsafe_fireexitsblocked" ]
fire_exit_amber_critical: P=? [ F<=T "unsafe_amber_critical" ]
fire_exit_amber: P=? [ F<=T "unsafe_amber" ]
red_next_count: filter(count, P=? [ X "unsafe_red" ])
red_next_sum: filter(sum, P=? [ X "unsafe_red" ])
red_next_avg: filter(avg, P=? [ X "unsafe_red" ])
// Main states against their avoidance states
main_reward: R{"main_states"}=? [ C<=T ]
avoidance_reward: R{"avoidance_states"}=? [ C<=T ]
avoidance_instant: R{"avoidance_states"}=? [ I=T ]
main_steady: R{"main_states"}=? [ S ]
// Behavioural-state levels; s=1 is SEARCHING, s=4 is DROPOFF
level_reached: P=? [ F<=T (s=state&l=level&timestep=T) ]
searching_first_half: P=? [ F[0,99] (s=1&l>=3) ]
dropoff_second_half: P=? [ F[100,199] (s=4&l>=3) ]
dropoff_until_searching: P>=0.25 [ s=4 U<=99.0 s=1 ]
// Density requirement
density_violation: P=? [ F<=T "density_violation" ]
// Invariants with counterexamples, reachability with witnesses
req1_invariant: A [ G !"unsafe_red" ]
req2_invariant: A [ G !"density_violation" ]
red_witness: E [ F "unsafe_red" ]
)";
  return pack;
}

Defines default_defines(const MarkovModel& model) {
  Defines d;
  const int ti = model.variable_index("timestep");
  int horizon = 0;
  if (ti >= 0) {
    for (const auto& v : model.valuations) horizon = std::max(horizon, v[ti]);
  }
  d.emplace_back("T", horizon);
  if (model.variable_index("s") >= 0) d.emplace_back("state", model.value(model.initial, "s"));
  d.emplace_back("level", 3.0);
  return d;
}

std::string property_kind(const Property& p) {
  switch (p.kind) {
    case Property::Kind::Prob: return p.prob_bound == ProbBound::Query ? "probability" : "probability_bound";
    case Property::Kind::Reward: return "reward";
    case Property::Kind::Filter: return std::string("filter_") + to_string(p.filter);
    case Property::Kind::CtlInvariant: return "ctl_invariant";
    case Property::Kind::CtlReach: return "ctl_reach";
    case Property::Kind::State: return "state";
  }
  return "?";
}

std::vector<CheckRow> check_properties(const MarkovModel& model, const std::vector<NamedProperty>& props,
                                       const Defines& defines, const fs::path& base, const fs::path& details_dir,
                                       const std::string& prefix) {
  const Checker checker(model);
  std::vector<CheckRow> rows;
  for (const auto& np : props) {
    CheckRow row;
    row.name = prefix + (np.name.empty() ? fmt::format("line{}", np.line) : np.name);
    row.kind = property_kind(np.property);
    row.result = checker.check(swarmvv::bind(np.property, model, defines));
    row.value = row.result.text();
    const auto& r = row.result;
    std::string details;
    if (r.kind == CheckResult::Kind::Trace && !r.trace.empty()) {
      details = trace_csv(model, r.trace);
    } else if (r.kind == CheckResult::Kind::Filter && r.filter == FilterKind::Print) {
      details = "state,value\n";
      for (const auto& [s, v] : r.printed) details += fmt::format("{},{}\n", s, v);
    }
    if (!details.empty() && !details_dir.empty()) {
      std::string file = row.name;
      std::replace(file.begin(), file.end(), '/', '_');
      const fs::path path = details_dir / (file + ".csv");
      write_text_file(path, details);
      row.details = fs::relative(path, base).generic_string();
    }
    row.violated = (r.kind == CheckResult::Kind::Boolean && !r.holds) ||
                   (r.kind == CheckResult::Kind::Trace && r.counterexample && !r.holds);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string results_csv(const std::vector<CheckRow>& rows) {
  std::string out = "property_name,kind,value_or_bool,details_path\n";
  for (const auto& r : rows) out += fmt::format("{},{},{},{}\n", r.name, r.kind, r.value, r.details);
  return out;
}

std::vector<ResultRecord> read_results_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  require_header(t, {"property_name", "kind", "value_or_bool", "details_path"}, path.string());
  std::vector<ResultRecord> out;
  for (const auto& row : t.rows) out.push_back({row[0], row[1], row[2], row[3]});
  return out;
}

}  // namespace swarmvv::cli
