#include "swarmvv_cli/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include <swarmvv/csv.hpp>
#include <swarmvv/lfsim.hpp>
#include <swarmvv/macro.hpp>
#include <swarmvv/plot.hpp>

#include "swarmvv_cli/stages.hpp"

namespace swarmvv::cli {

using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "0.3.0";

/// Errors with a message meant for the user; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path resolve_out(const std::string& given, const std::string& default_name) {
  if (!given.empty()) return given;
  const char* root = std::getenv("SWARMVV_OUT_ROOT");
  return fs::path(root && *root ? root : "swarmvv-out") / default_name;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

int default_jobs() { return static_cast<int>(std::max(1U, std::thread::hardware_concurrency())); }

struct Manifest {
  std::string command;
  std::vector<std::string> args;  ///< replayable arguments without --out
  json extra = json::object();
  std::vector<std::string> stages;
  std::vector<std::string> outputs;
  std::string started = utc_now();

  void write(const fs::path& dir) const {
    json j = extra;
    j["format"] = "swarmvv-manifest/1";
    j["tool_version"] = kVersion;
    j["command"] = command;
    j["args"] = args;
    j["stages"] = stages;
    j["outputs"] = outputs;
    j["started_utc"] = started;
    j["finished_utc"] = utc_now();
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
  }
};

ScenarioConfig scenario_for(const std::string& config_path, const std::string& preset) {
  if (!config_path.empty()) return load_scenario(config_path);
  if (preset == "smoke") return smoke_scenario();
  if (preset == "paper") return default_scenario();
  throw UsageError("unknown preset '" + preset + "' (expected smoke or paper)");
}

int preset_trials(const std::string& preset) { return preset == "smoke" ? 10 : 1000; }

std::string config_hash(const ScenarioConfig& c) { return hex64(fnv1a64(scenario_to_json(c))); }

Defines parse_defines(const std::vector<std::string>& items) {
  Defines d;
  for (const auto& i : items) {
    try {
      d.push_back(parse_define(i));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return d;
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings, std::size_t limit = 10) {
  for (std::size_t i = 0; i < std::min(limit, warnings.size()); ++i) err << "warning: " << warnings[i] << "\n";
  if (warnings.size() > limit) err << fmt::format("warning: ... {} more\n", warnings.size() - limit);
}

void write_warnings(const fs::path& dir, const std::vector<std::string>& warnings) {
  if (warnings.empty()) return;
  std::string text;
  for (const auto& w : warnings) text += w + "\n";
  write_text_file(dir / "warnings.txt", text);
}

void write_source(const fs::path& dir, const SourceSeries& s, Source source) {
  fs::create_directories(dir);
  write_text_file(dir / "clean.csv", clean_csv(s.averaged));
  write_text_file(dir / "stats.json", stats_json(s.stats, source));
  write_warnings(dir, s.warnings);
}

DiscreteSeries discretize_into(const fs::path& dir, const CleanSeries& clean, int bins) {
  DiscreteSeries d = discretize_ewd(clean, bins);
  write_text_file(dir / "discrete.csv", discrete_csv(d));
  write_text_file(dir / "bins.json", bins_json(d));
  return d;
}

std::vector<std::pair<std::string, MarkovModel>> build_models(const DiscreteSeries& d, const std::string& mode,
                                                              const std::string& state) {
  std::vector<std::pair<std::string, MarkovModel>> out;
  if (mode == "joint") {
    out.emplace_back("joint", build_model(d, BuildMode::Joint));
    return out;
  }
  if (mode != "per-state") throw UsageError("unknown mode '" + mode + "' (expected per-state or joint)");
  if (state == "all") {
    for (BehaviourState s : kAllBehaviourStates) out.emplace_back(channel_name(s), build_model(d, BuildMode::PerStateChain, s));
    return out;
  }
  std::optional<BehaviourState> s = parse_behaviour_state(state);
  if (!s) {
    for (BehaviourState c : kAllBehaviourStates) {
      if (state == channel_name(c)) s = c;
    }
  }
  if (!s) throw UsageError("unknown behavioural state '" + state + "'");
  out.emplace_back(channel_name(*s), build_model(d, BuildMode::PerStateChain, *s));
  return out;
}

std::string format_rows(const std::vector<CheckRow>& rows) {
  std::size_t w = 8;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  std::string out;
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}  {:<18} {}{}\n", r.name, w, r.kind, r.value, r.violated ? "  <-- violated" : "");
  }
  return out;
}

struct Sweep {
  std::string label;
  std::string property;
};

/// Runs sweeps over T on one model; writes <stem>.csv (T + one column per
/// sweep) and returns the plotted series.
std::vector<PlotSeries> sweep_curves(const MarkovModel& model, const std::vector<Sweep>& sweeps, const fs::path& dir,
                                     const std::string& stem, const std::string& series_prefix, int jobs) {
  const Defines base = default_defines(model);
  double horizon = 0.0;
  Defines rest;
  for (const auto& [k, v] : base) {
    if (k == "T") {
      horizon = v;
    } else {
      rest.emplace_back(k, v);
    }
  }
  SweepSpec spec{"T", 0.0, std::max(1.0, std::floor(horizon / 20.0)), horizon};
  std::vector<PlotSeries> series;
  std::vector<ExperimentResult> results;
  for (const auto& s : sweeps) {
    results.push_back(run_experiment(model, parse_property(s.property), spec, rest, jobs));
    PlotSeries ps{series_prefix + s.label, results.back().points, {}};
    for (const auto& r : results.back().results) ps.y.push_back(r.scalar());
    series.push_back(std::move(ps));
  }
  std::string csv = "T";
  for (const auto& s : sweeps) csv += "," + s.label;
  csv += "\n";
  for (std::size_t i = 0; i < results.front().points.size(); ++i) {
    csv += fmt::format("{}", results.front().points[i]);
    for (const auto& r : results) csv += "," + r.results[i].text();
    csv += "\n";
  }
  write_text_file(dir / (stem + ".csv"), csv);
  return series;
}

// ---------------------------------------------------------------------------

struct Context {
  std::ostream& out;
  std::ostream& err;
};

int cmd_simulate(Context& ctx, const std::string& config, const std::string& preset, int trials, std::uint64_t seed,
                 const std::string& out_arg, bool force, int jobs) {
  const ScenarioConfig cfg = scenario_for(config, preset);
  const int n = trials > 0 ? trials : preset_trials(preset);
  const fs::path out = resolve_out(out_arg, "campaign");
  const CampaignSummary sum = run_campaign(cfg, n, seed, out, {force, jobs});
  Manifest m;
  m.command = "simulate";
  m.args = {"--trials", std::to_string(n), "--seed", std::to_string(seed)};
  if (!config.empty()) {
    m.args.insert(m.args.end(), {"--config", absolute(config)});
  } else {
    m.args.insert(m.args.end(), {"--preset", preset});
  }
  m.args.emplace_back("--force");
  m.extra["config_hash"] = config_hash(cfg);
  m.extra["seed"] = seed;
  m.extra["trials"] = n;
  m.stages = {"simulate"};
  m.outputs = {"campaign.json", "scenario.json", "trial_*/"};
  m.write(out);
  ctx.out << fmt::format("{} trials written to {}; deposits {}, red-zone entries {} ({} trials with red)\n", n,
                         out.string(), sum.total_deposits, sum.total_red_entries, sum.trials_with_red);
  return kExitOk;
}

ZoneMap campaign_zones(const fs::path& campaign) {
  const fs::path scenario = campaign / "scenario.json";
  if (!fs::exists(scenario)) throw UsageError("campaign " + campaign.string() + " has no scenario.json");
  return build_zone_map(load_scenario(scenario));
}

int cmd_clean(Context& ctx, const std::string& campaign, const std::string& out_arg, int stride, int jobs) {
  const fs::path out = resolve_out(out_arg, "clean");
  const SourceSeries s = clean_lf_campaign(campaign, campaign_zones(campaign), stride, jobs);
  write_source(out, s, Source::LF);
  Manifest m;
  m.command = "clean";
  m.args = {"--campaign", absolute(campaign), "--stride", std::to_string(stride)};
  m.stages = {"clean", "downsample", "average"};
  m.outputs = {"clean.csv", "stats.json"};
  m.write(out);
  print_warnings(ctx.err, s.warnings);
  ctx.out << fmt::format("averaged {} samples written to {}\n", s.averaged.samples.size(),
                         (out / "clean.csv").string());
  return kExitOk;
}

int cmd_discretize(Context& ctx, const std::string& clean, int bins, const std::string& out_arg) {
  const fs::path out = resolve_out(out_arg, "discrete");
  fs::create_directories(out);
  const DiscreteSeries d = discretize_into(out, parse_clean_csv(read_text_file(clean), clean), bins);
  Manifest m;
  m.command = "discretize";
  m.args = {"--clean", absolute(clean), "--bins", std::to_string(bins)};
  m.stages = {"discretize"};
  m.outputs = {"discrete.csv", "bins.json"};
  m.write(out);
  print_warnings(ctx.err, d.warnings);
  ctx.out << fmt::format("{} samples discretized into {} levels in {}\n", d.samples.size(), bins, out.string());
  return kExitOk;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::vector<std::string> absolute_all(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(absolute(p));
  return out;
}

int cmd_ingest_hf(Context& ctx, const std::vector<std::string>& inputs, const std::string& config,
                  const std::string& out_arg) {
  const fs::path out = resolve_out(out_arg, "hf");
  const SourceSeries s = ingest_hf_files(to_paths(inputs), build_zone_map(scenario_for(config, "paper")));
  write_source(out, s, Source::HF);
  Manifest m;
  m.command = "ingest-hf";
  m.args = {"--input"};
  for (const auto& p : absolute_all(inputs)) m.args.push_back(p);
  if (!config.empty()) m.args.insert(m.args.end(), {"--config", absolute(config)});
  m.stages = {"ingest-hf", "average"};
  m.outputs = {"clean.csv", "stats.json"};
  m.write(out);
  print_warnings(ctx.err, s.warnings);
  ctx.out << fmt::format("{} HF-format trials averaged into {} samples in {}\n", inputs.size(),
                         s.averaged.samples.size(), out.string());
  return kExitOk;
}

void write_phys(const fs::path& out, const std::vector<std::string>& inputs, const PhysSeries& p) {
  write_source(out, p.source, Source::PHYS);
  write_text_file(out / "availability.json", availability_json(to_paths(inputs), p.trials));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    write_text_file(out / "positions_1hz" / (fs::path(inputs[i]).stem().string() + ".csv"),
                    position_trace_csv(p.trials[i].trace));
  }
}

int cmd_downsample_phys(Context& ctx, const std::vector<std::string>& inputs, int duration, const std::string& config,
                        const std::string& out_arg) {
  const fs::path out = resolve_out(out_arg, "phys");
  const PhysSeries p = downsample_phys_files(to_paths(inputs), build_zone_map(scenario_for(config, "paper")), duration);
  write_phys(out, inputs, p);
  Manifest m;
  m.command = "downsample-phys";
  m.args = {"--duration", std::to_string(duration), "--input"};
  for (const auto& x : absolute_all(inputs)) m.args.push_back(x);
  if (!config.empty()) m.args.insert(m.args.end(), {"--config", absolute(config)});
  m.stages = {"downsample-phys", "average"};
  m.outputs = {"clean.csv", "stats.json", "availability.json", "positions_1hz/"};
  m.write(out);
  print_warnings(ctx.err, p.source.warnings);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& a = p.trials[i].availability;
    ctx.out << fmt::format("{}: coverage {:.1f}%, longest gap {} s (robot {}), {} missing robot-seconds\n", inputs[i],
                           100.0 * a.coverage, a.max_gap_s, a.max_gap_robot, a.missing_entries);
  }
  return kExitOk;
}

std::string stats_table(const ZoneTimeStats& st) {
  return fmt::format("trials {}: red {:.2f} s, >=2 robots in amber {:.2f} s, >=1 robot in amber {:.2f} s\n",
                     st.trials, st.red_s, st.amber_critical_s, st.amber_single_s);
}

int cmd_stats(Context& ctx, const std::vector<std::string>& cleans, const std::string& campaign,
              const std::string& out_arg, int jobs) {
  ZoneTimeStats st;
  Source source = Source::LF;
  if (!campaign.empty()) {
    st = clean_lf_campaign(campaign, campaign_zones(campaign), 1, jobs).stats;
  } else if (!cleans.empty()) {
    std::vector<CleanSeries> series;
    for (const auto& c : cleans) series.push_back(parse_clean_csv(read_text_file(c), c));
    source = series.front().source;
    st = zone_time_stats(series);
  } else {
    throw UsageError("stats needs --campaign or --clean");
  }
  ctx.out << stats_table(st);
  if (!out_arg.empty()) write_text_file(out_arg, stats_json(st, source));
  return kExitOk;
}

int cmd_macro_evolve(Context& ctx, const std::string& params_path, int steps, const std::string& out_arg) {
  const MacroParams p = load_params(params_path);
  const auto traj = evolve(PopulationVector::all_searching(p.t_s, p.n), p, steps);
  const fs::path out = out_arg.empty() ? resolve_out("", "macro") / "trajectory.csv" : fs::path(out_arg);
  write_text_file(out, trajectory_csv(traj));
  const auto last = traj.back().aggregate();
  ctx.out << fmt::format("{} steps written to {}; final counts", steps, out.string());
  for (BehaviourState s : kAllBehaviourStates) ctx.out << fmt::format(" {}={:.4f}", channel_name(s), last[static_cast<int>(s)]);
  ctx.out << "\n";
  return kExitOk;
}

int cmd_macro_estimate(Context& ctx, const std::string& campaign, int cap, const std::string& out_arg) {
  const ParamEstimate est = estimate_params(fs::path(campaign), cap);
  const MacroParams p = est.params();
  const fs::path out = out_arg.empty() ? resolve_out("", "macro") / "params.json" : fs::path(out_arg);
  write_text_file(out, params_to_json(p));
  ctx.out << fmt::format("P_s={:.6g} P_p={:.6g} P_a={:.6g} T_s={} N={} (observed max sojourn {}) -> {}\n", p.p_s, p.p_p,
                         p.p_a, p.t_s, p.n, est.observed_max_sojourn, out.string());
  return kExitOk;
}

int cmd_build_model(Context& ctx, const std::string& discrete, const std::string& bins_arg, const std::string& mode,
                    const std::string& state, const std::string& out_arg) {
  const fs::path bins = bins_arg.empty() ? fs::path(discrete).parent_path() / "bins.json" : fs::path(bins_arg);
  const DiscreteSeries d = parse_discrete(read_text_file(discrete), read_text_file(bins));
  const fs::path out = resolve_out(out_arg, "models");
  Manifest m;
  m.command = "build-model";
  m.args = {"--discrete", absolute(discrete), "--bins", absolute(bins.string()), "--mode", mode, "--state", state};
  m.stages = {"build-model"};
  for (const auto& [name, model] : build_models(d, mode, state)) {
    save_model(model, out / ("model_" + name + ".ctmc"));
    m.outputs.push_back("model_" + name + ".ctmc");
    ctx.out << fmt::format("model_{}.ctmc: {} states, {} transitions\n", name, model.n_states(),
                           model.transitions.size());
  }
  m.write(out);
  return kExitOk;
}

int cmd_check(Context& ctx, const std::string& model_path, const std::string& props_path,
              const std::vector<std::string>& defines, const std::string& out_arg) {
  const MarkovModel model = load_model(model_path);
  const auto props = parse_property_file(read_text_file(props_path));
  const Defines d = parse_defines(defines);
  fs::path base = fs::current_path();
  fs::path details;
  if (!out_arg.empty()) {
    base = fs::absolute(out_arg).parent_path();
    details = base / "details";
  }
  std::vector<CheckRow> rows;
  for (const auto& np : props) {
    for (const auto& w : swarmvv::bind(np.property, model, d).warnings) ctx.err << "warning: " << w << "\n";
  }
  rows = check_properties(model, props, d, base, details, "");
  ctx.out << format_rows(rows);
  if (!out_arg.empty()) write_text_file(out_arg, results_csv(rows));
  const bool violated = std::any_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.violated; });
  return violated ? kExitViolations : kExitOk;
}

int cmd_experiment(Context& ctx, const std::string& model_path, const std::string& prop, const std::string& sweep,
                   const std::vector<std::string>& defines, const std::string& out_arg, const std::string& plot,
                   int jobs) {
  const MarkovModel model = load_model(model_path);
  const Property p = parse_property(prop);
  const ExperimentResult r = run_experiment(model, p, parse_sweep(sweep), parse_defines(defines), jobs);
  print_warnings(ctx.err, r.warnings);
  const std::string csv = experiment_csv(r);
  if (out_arg.empty()) {
    ctx.out << csv;
  } else {
    write_text_file(out_arg, csv);
    ctx.out << fmt::format("{} sweep points written to {}\n", r.points.size(), out_arg);
  }
  if (!plot.empty()) {
    PlotSeries s{prop, r.points, {}};
    for (const auto& x : r.results) s.y.push_back(x.scalar());
    write_text_file(plot, render_line_chart(prop, r.variable, "value", {s}));
  }
  return kExitOk;
}

int cmd_report(Context& ctx, const std::string& run_dir) {
  const std::string text = render_report(run_dir);
  write_text_file(fs::path(run_dir) / "report.txt", text);
  ctx.out << text;
  return kExitOk;
}

struct AllOptions {
  std::string preset = "paper";
  std::string config;
  int trials = 0;
  std::uint64_t seed = 1;
  std::string out;
  bool force = false;
  bool strict = false;
  int jobs = 1;
  int stride = 50;
  int bins = 5;
  std::vector<std::string> hf;
  std::vector<std::string> phys;
  int phys_duration = 200;
};

int cmd_all(Context& ctx, const AllOptions& o) {
  const ScenarioConfig cfg = scenario_for(o.config, o.preset);
  const ZoneMap zones = build_zone_map(cfg);
  const int trials = o.trials > 0 ? o.trials : preset_trials(o.preset);
  const fs::path out = resolve_out(o.out, "run");
  if (fs::exists(out) && !fs::is_empty(out) && !o.force) {
    throw UsageError("output directory " + out.string() + " is not empty (use --force to overwrite)");
  }
  Manifest m;
  m.command = "all";
  m.args = {"--trials", std::to_string(trials), "--seed", std::to_string(o.seed), "--stride", std::to_string(o.stride),
            "--bins", std::to_string(o.bins)};
  if (!o.config.empty()) {
    m.args.insert(m.args.end(), {"--config", absolute(o.config)});
  } else {
    m.args.insert(m.args.end(), {"--preset", o.preset});
  }
  if (!o.hf.empty()) {
    m.args.emplace_back("--hf");
    for (const auto& p : absolute_all(o.hf)) m.args.push_back(p);
  }
  if (!o.phys.empty()) {
    m.args.insert(m.args.end(), {"--phys-duration", std::to_string(o.phys_duration), "--phys"});
    for (const auto& p : absolute_all(o.phys)) m.args.push_back(p);
  }
  m.args.emplace_back("--force");
  m.extra["config_hash"] = config_hash(cfg);
  m.extra["seed"] = o.seed;
  m.extra["trials"] = trials;
  m.extra["preset"] = o.config.empty() ? o.preset : "custom";

  ctx.out << fmt::format("[1/8] simulate {} trials\n", trials);
  run_campaign(cfg, trials, o.seed, out / "campaign", {o.force, o.jobs});
  m.stages.emplace_back("simulate");

  ctx.out << "[2/8] clean, downsample and average LF trials\n";
  std::vector<std::pair<std::string, SourceSeries>> sources;
  sources.emplace_back("lf", clean_lf_campaign(out / "campaign", zones, o.stride, o.jobs));
  write_source(out / "lf", sources.back().second, Source::LF);
  m.stages.insert(m.stages.end(), {"clean", "downsample", "average"});

  if (!o.hf.empty()) {
    ctx.out << fmt::format("      ingest {} HF-format trials\n", o.hf.size());
    sources.emplace_back("hf", ingest_hf_files(to_paths(o.hf), zones));
    write_source(out / "hf", sources.back().second, Source::HF);
    m.stages.emplace_back("ingest-hf");
  }
  if (!o.phys.empty()) {
    ctx.out << fmt::format("      downsample {} physical trials\n", o.phys.size());
    const PhysSeries p = downsample_phys_files(to_paths(o.phys), zones, o.phys_duration);
    write_phys(out / "phys", o.phys, p);
    sources.emplace_back("phys", p.source);
    m.stages.emplace_back("downsample-phys");
  }
  for (const auto& [key, s] : sources) print_warnings(ctx.err, s.warnings, 5);

  ctx.out << "[3/8] discretize\n";
  std::vector<std::pair<std::string, DiscreteSeries>> discrete;
  for (const auto& [key, s] : sources) discrete.emplace_back(key, discretize_into(out / key, s.averaged, o.bins));
  m.stages.emplace_back("discretize");

  ctx.out << "[4/8] build models\n";
  std::vector<std::pair<std::string, MarkovModel>> models;
  for (const auto& [key, d] : discrete) {
    if (d.levels_available) {
      for (auto& [name, model] : build_models(d, "per-state", "all")) models.emplace_back(key + "/" + name, std::move(model));
    } else {
      models.emplace_back(key + "/positions", build_model(d, BuildMode::PerStateChain));
    }
  }
  for (const auto& [name, model] : models) {
    std::string file = name;
    std::replace(file.begin(), file.end(), '/', '_');
    save_model(model, out / "models" / (file + ".ctmc"));
  }
  m.stages.emplace_back("build-model");

  ctx.out << "[5/8] check the default property pack\n";
  write_text_file(out / "properties.props", default_property_pack());
  const auto props = parse_property_file(default_property_pack());
  std::vector<CheckRow> rows;
  for (const auto& [name, model] : models) {
    auto r = check_properties(model, props, default_defines(model), out, out / "details", name + "/");
    rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  write_text_file(out / "results.csv", results_csv(rows));
  m.stages.emplace_back("check");
  const long violations = std::count_if(rows.begin(), rows.end(), [](const CheckRow& r) { return r.violated; });
  if (o.strict && violations > 0) {
    m.outputs = {"campaign/", "lf/", "models/", "properties.props", "results.csv", "details/"};
    m.write(out);
    ctx.err << fmt::format("{} property violations; stopping (--strict)\n", violations);
    return kExitViolations;
  }

  ctx.out << "[6/8] sweep experiments\n";
  const fs::path curves = out / "curves";
  std::vector<PlotSeries> fire, rewards, levels;
  for (const auto& [name, model] : models) {
    const std::string key = name.substr(0, name.find('/'));
    const std::string model_name = name.substr(name.find('/') + 1);
    if (model_name != "searching" && model_name != "positions") continue;
    auto f = sweep_curves(model, {{"red", "P=? [ F<=T \"unsafe_red\" ]"},
                                  {"amber_critical", "P=? [ F<=T \"unsafe_amber_critical\" ]"},
                                  {"amber", "P=? [ F<=T \"unsafe_amber\" ]"},
                                  {"density", "P=? [ F<=T \"density_violation\" ]"}},
                          curves, key + "_unsafe", key + " ", o.jobs);
    fire.insert(fire.end(), f.begin(), f.end());
    if (model_name == "searching") {
      auto r = sweep_curves(model, {{"main_states", "R{\"main_states\"}=? [ C<=T ]"},
                                    {"avoidance_states", "R{\"avoidance_states\"}=? [ C<=T ]"}},
                            curves, key + "_rewards", key + " ", o.jobs);
      rewards.insert(rewards.end(), r.begin(), r.end());
    }
  }
  for (const auto& [name, model] : models) {
    if (name.rfind("lf/", 0) != 0) continue;
    auto l = sweep_curves(model, {{"level_ge_3", "P=? [ F<=T l>=level ]"}}, curves, "lf_level_" + name.substr(3),
                          name.substr(3) + " ", o.jobs);
    levels.insert(levels.end(), l.begin(), l.end());
  }
  write_text_file(curves / "unsafe.svg", render_line_chart("Unsafe situations within T", "T (sampled steps)",
                                                           "probability", fire));
  write_text_file(curves / "rewards.svg",
                  render_line_chart("Cumulative state rewards", "T (sampled steps)", "expected reward", rewards));
  write_text_file(curves / "levels.svg",
                  render_line_chart("Reaching level 3 or above", "T (sampled steps)", "probability", levels));
  m.stages.emplace_back("experiment");

  ctx.out << "[7/8] report\n";
  write_text_file(out / "report.txt", render_report(out));
  m.stages.emplace_back("report");

  ctx.out << "[8/8] manifest\n";
  m.outputs = {"campaign/", "lf/", "models/", "properties.props", "results.csv", "details/", "curves/", "report.txt"};
  if (!o.hf.empty()) m.outputs.emplace_back("hf/");
  if (!o.phys.empty()) m.outputs.emplace_back("phys/");
  m.write(out);
  ctx.out << fmt::format("run complete: {} ({} properties checked, {} violated)\n", out.string(), rows.size(),
                         violations);
  return violations > 0 ? kExitViolations : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Corroborative verification and validation toolkit for a cloakroom robot swarm", "swarmvv"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 property violations found, 2 errors.\n"
             "SWARMVV_OUT_ROOT sets the default output root (default ./swarmvv-out).");
  std::function<int()> action;

  // Shared option storage; each subcommand binds the ones it needs.
  std::string config, preset = "paper", out_dir, campaign, clean, discrete, bins_path, model, props, prop, sweep, plot,
                      params, run_dir, manifest, mode = "per-state", state = "all";
  std::vector<std::string> inputs, defines, cleans;
  int trials = 0, jobs = default_jobs(), stride = 50, bins = 5, duration = 200, steps = 10000, cap = 50;
  std::uint64_t seed = 1;
  bool force = false;
  AllOptions all;
  all.jobs = jobs;

  auto* sim = app.add_subcommand("simulate", "Run an LF simulation campaign");
  sim->add_option("--config", config, "Scenario file (JSON); overrides --preset")->check(CLI::ExistingFile);
  sim->add_option("--preset", preset, "Named configuration: paper or smoke")->capture_default_str();
  sim->add_option("--trials", trials, "Number of trials (default: 1000 for paper, 10 for smoke)");
  sim->add_option("--seed", seed, "Base seed; trial i uses seed + i")->capture_default_str();
  sim->add_option("--out", out_dir, "Campaign directory");
  sim->add_flag("--force", force, "Overwrite an existing campaign directory");
  sim->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sim->callback([&] { action = [&] { return cmd_simulate(ctx, config, preset, trials, seed, out_dir, force, jobs); }; });

  auto* cl = app.add_subcommand("clean", "Clean, downsample and average an LF campaign");
  cl->add_option("--campaign", campaign, "Campaign directory")->required()->check(CLI::ExistingDirectory);
  cl->add_option("--out", out_dir, "Output directory (clean.csv, stats.json)");
  cl->add_option("--stride", stride, "Downsampling stride; 1 keeps every step")->capture_default_str()->check(CLI::PositiveNumber);
  cl->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  cl->callback([&] { action = [&] { return cmd_clean(ctx, campaign, out_dir, stride, jobs); }; });

  auto* dz = app.add_subcommand("discretize", "Equal-width discretization of a clean series");
  dz->add_option("--clean", clean, "clean.csv")->required()->check(CLI::ExistingFile);
  dz->add_option("--bins", bins, "Number of levels")->capture_default_str()->check(CLI::PositiveNumber);
  dz->add_option("--out", out_dir, "Output directory (discrete.csv, bins.json)");
  dz->callback([&] { action = [&] { return cmd_discretize(ctx, clean, bins, out_dir); }; });

  auto* hf = app.add_subcommand("ingest-hf", "Ingest HF-format position traces (one file per trial)");
  hf->add_option("--input", inputs, "robot_id,t_s,x_m,y_m files")->required()->check(CLI::ExistingFile);
  hf->add_option("--config", config, "Scenario file for zone geometry")->check(CLI::ExistingFile);
  hf->add_option("--out", out_dir, "Output directory");
  hf->callback([&] { action = [&] { return cmd_ingest_hf(ctx, inputs, config, out_dir); }; });

  auto* ph = app.add_subcommand("downsample-phys", "Resample physical recordings to 1 Hz by nearest sample");
  ph->add_option("--input", inputs, "robot_id,t_s,x_m,y_m files")->required()->check(CLI::ExistingFile);
  ph->add_option("--duration", duration, "Seconds per trial")->capture_default_str()->check(CLI::PositiveNumber);
  ph->add_option("--config", config, "Scenario file for zone geometry")->check(CLI::ExistingFile);
  ph->add_option("--out", out_dir, "Output directory");
  ph->callback([&] { action = [&] { return cmd_downsample_phys(ctx, inputs, duration, config, out_dir); }; });

  auto* st = app.add_subcommand("stats", "Zone-time statistics (mean seconds per trial)");
  st->add_option("--campaign", campaign, "LF campaign directory")->check(CLI::ExistingDirectory);
  st->add_option("--clean", cleans, "Per-trial clean.csv files")->check(CLI::ExistingFile);
  st->add_option("--out", out_dir, "Write stats JSON to this file");
  st->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  st->callback([&] { action = [&] { return cmd_stats(ctx, cleans, campaign, out_dir, jobs); }; });

  auto* mac = app.add_subcommand("macro", "Macroscopic population model");
  mac->require_subcommand(1);
  auto* ev = mac->add_subcommand("evolve", "Mean-field evolution from all robots searching");
  ev->add_option("--params", params, "Parameter JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--steps", steps, "Timesteps")->capture_default_str()->check(CLI::NonNegativeNumber);
  ev->add_option("--out", out_dir, "Trajectory CSV");
  ev->callback([&] { action = [&] { return cmd_macro_evolve(ctx, params, steps, out_dir); }; });
  auto* es = mac->add_subcommand("estimate", "Estimate parameters from an LF campaign");
  es->add_option("--campaign", campaign, "Campaign directory")->required()->check(CLI::ExistingDirectory);
  es->add_option("--sojourn-cap", cap, "Upper bound on T_s")->capture_default_str()->check(CLI::PositiveNumber);
  es->add_option("--out", out_dir, "Parameter JSON");
  es->callback([&] { action = [&] { return cmd_macro_estimate(ctx, campaign, cap, out_dir); }; });

  auto* bm = app.add_subcommand("build-model", "Build CTMC models from a discretized series");
  bm->add_option("--discrete", discrete, "discrete.csv")->required()->check(CLI::ExistingFile);
  bm->add_option("--bins", bins_path, "bins.json (default: next to discrete.csv)");
  bm->add_option("--mode", mode, "per-state or joint")->capture_default_str();
  bm->add_option("--state", state, "Behavioural state for per-state mode, or all")->capture_default_str();
  bm->add_option("--out", out_dir, "Output directory");
  bm->callback([&] { action = [&] { return cmd_build_model(ctx, discrete, bins_path, mode, state, out_dir); }; });

  auto* ck = app.add_subcommand("check", "Check a property file against a model");
  ck->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
  ck->add_option("--props", props, "Property file")->required()->check(CLI::ExistingFile);
  ck->add_option("--define", defines, "Constant NAME=VALUE (repeatable)");
  ck->add_option("--out", out_dir, "Results CSV");
  ck->callback([&] { action = [&] { return cmd_check(ctx, model, props, defines, out_dir); }; });

  auto* ex = app.add_subcommand("experiment", "Sweep a constant and evaluate a property at every point");
  ex->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
  ex->add_option("--prop", prop, "Property text")->required();
  ex->add_option("--sweep", sweep, "NAME=START:STEP:STOP")->required();
  ex->add_option("--define", defines, "Constant NAME=VALUE (repeatable)");
  ex->add_option("--out", out_dir, "Series CSV (default: stdout)");
  ex->add_option("--plot", plot, "SVG plot file");
  ex->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  ex->callback([&] { action = [&] { return cmd_experiment(ctx, model, prop, sweep, defines, out_dir, plot, jobs); }; });

  auto* rp = app.add_subcommand("report", "Render report.txt for a run directory");
  rp->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  rp->callback([&] { action = [&] { return cmd_report(ctx, run_dir); }; });

  auto* al = app.add_subcommand("all", "Full workflow: simulate through report");
  al->add_option("--preset", all.preset, "paper or smoke")->capture_default_str();
  al->add_option("--config", all.config, "Scenario file; overrides --preset")->check(CLI::ExistingFile);
  al->add_option("--trials", all.trials, "LF trials (default from preset)");
  al->add_option("--seed", all.seed, "Base seed")->capture_default_str();
  al->add_option("--out", all.out, "Run directory");
  al->add_flag("--force", all.force, "Reuse a non-empty run directory");
  al->add_flag("--strict", all.strict, "Stop after the check stage when violations are found");
  al->add_option("--jobs", all.jobs, "Worker threads")->check(CLI::PositiveNumber);
  al->add_option("--stride", all.stride, "LF downsampling stride")->capture_default_str()->check(CLI::PositiveNumber);
  al->add_option("--bins", all.bins, "Discretization levels")->capture_default_str()->check(CLI::PositiveNumber);
  al->add_option("--hf", all.hf, "HF-format trial files")->check(CLI::ExistingFile);
  al->add_option("--phys", all.phys, "Physical-format trial files")->check(CLI::ExistingFile);
  al->add_option("--phys-duration", all.phys_duration, "Seconds per physical trial")->capture_default_str();
  al->callback([&] { action = [&] { return cmd_all(ctx, all); }; });

  auto* re = app.add_subcommand("replay", "Re-run the command recorded in a manifest into a new directory");
  re->add_option("--manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  re->add_option("--out", out_dir, "Output directory")->required();
  re->callback([&] {
    action = [&] {
      const auto j = json::parse(read_text_file(manifest));
      std::vector<std::string> replay{j.at("command").get<std::string>()};
      for (const auto& a : j.at("args")) replay.push_back(a.get<std::string>());
      replay.insert(replay.end(), {"--out", out_dir});
      return run(replay, out, err);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }
  try {
    return action ? action() : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace swarmvv::cli
