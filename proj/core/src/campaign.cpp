#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/core.h>
#include <json.hpp>

#include "swarmvv/csv.hpp"
#include "swarmvv/lfsim.hpp"

namespace swarmvv {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCountsHeader{"t",       "searching", "pickup", "dropoff",
                                             "avoid_s", "avoid_p",   "avoid_d"};
const std::vector<std::string> kStatesHeader{"t", "robot_id", "state"};
const std::vector<std::string> kPositionsHeader{"t", "robot_id", "x_m", "y_m"};
const std::vector<std::string> kKinematicsHeader{"t", "robot_id", "speed_m_s", "in_deposit"};

constexpr int kDecimals = 4;

std::string header_line(const std::vector<std::string>& cols) {
  std::string s;
  for (const auto& c : cols) s += (s.empty() ? "" : ",") + c;
  return s + "\n";
}

struct TrialFiles {
  std::string counts;
  std::string states;
  std::string positions;
  std::string kinematics;
};

TrialFiles render(const TrialOutput& trial) {
  TrialFiles f;
  f.counts = header_line(kCountsHeader);
  f.states = header_line(kStatesHeader);
  f.positions = header_line(kPositionsHeader);
  f.kinematics = header_line(kKinematicsHeader);
  for (int t = 0; t < trial.n_steps; ++t) {
    const auto& c = trial.state_counts[t];
    f.counts += fmt::format("{},{},{},{},{},{},{}\n", t, c[0], c[1], c[2], c[3], c[4], c[5]);
    for (int r = 0; r < trial.n_robots; ++r) {
      const auto i = trial.index(t, r);
      f.states += fmt::format("{},{},{}\n", t, r, to_string(trial.robot_states[i]));
      f.positions += fmt::format("{},{},{},{}\n", t, r, fixed(trial.positions[i].x, kDecimals),
                                 fixed(trial.positions[i].y, kDecimals));
      f.kinematics += fmt::format("{},{},{},{}\n", t, r, fixed(trial.speeds[i], kDecimals),
                                  trial.in_deposit[i] ? 1 : 0);
    }
  }
  return f;
}

std::string checksum(const TrialFiles& f) {
  std::uint64_t h = fnv1a64(f.counts);
  h = fnv1a64(f.states, h);
  h = fnv1a64(f.positions, h);
  h = fnv1a64(f.kinematics, h);
  return hex64(h);
}

void check_row_key(const std::vector<std::string>& row, int t, int r, const std::string& origin) {
  if (parse_long(row[0], origin) != t || parse_long(row[1], origin) != r) {
    throw SchemaError(fmt::format("{}: expected row for t={} robot={}, found t={} robot={}", origin, t,
                                  r, row[0], row[1]));
  }
}

}  // namespace

void write_trial_csv(const TrialOutput& trial, const fs::path& dir) {
  fs::create_directories(dir);
  const TrialFiles f = render(trial);
  write_text_file(dir / "counts.csv", f.counts);
  write_text_file(dir / "states.csv", f.states);
  write_text_file(dir / "positions.csv", f.positions);
  write_text_file(dir / "kinematics.csv", f.kinematics);
}

TrialOutput read_trial_csv(const fs::path& dir) {
  const CsvTable counts = read_csv(dir / "counts.csv");
  const CsvTable states = read_csv(dir / "states.csv");
  const CsvTable positions = read_csv(dir / "positions.csv");
  const CsvTable kinematics = read_csv(dir / "kinematics.csv");
  require_header(counts, kCountsHeader, (dir / "counts.csv").string());
  require_header(states, kStatesHeader, (dir / "states.csv").string());
  require_header(positions, kPositionsHeader, (dir / "positions.csv").string());
  require_header(kinematics, kKinematicsHeader, (dir / "kinematics.csv").string());

  TrialOutput trial;
  trial.n_steps = static_cast<int>(counts.rows.size());
  if (trial.n_steps == 0) throw SchemaError(dir.string() + ": counts.csv has no rows");
  if (states.rows.size() % trial.n_steps != 0) {
    throw SchemaError(dir.string() + ": states.csv row count is not a multiple of the timestep count");
  }
  trial.n_robots = static_cast<int>(states.rows.size() / trial.n_steps);
  const std::size_t cells = states.rows.size();
  if (positions.rows.size() != cells || kinematics.rows.size() != cells) {
    throw SchemaError(dir.string() + ": per-robot datasets have inconsistent row counts");
  }

  for (int t = 0; t < trial.n_steps; ++t) {
    const auto& row = counts.rows[t];
    if (parse_long(row[0], "counts.csv t") != t) {
      throw SchemaError(fmt::format("{}: counts.csv missing timestep {}", dir.string(), t));
    }
    std::array<int, kNumBehaviourStates> c{};
    for (int k = 0; k < kNumBehaviourStates; ++k) c[k] = static_cast<int>(parse_long(row[k + 1], "counts.csv"));
    trial.state_counts.push_back(c);
  }

  trial.robot_states.reserve(cells);
  trial.positions.reserve(cells);
  trial.speeds.reserve(cells);
  trial.in_deposit.reserve(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    const int t = static_cast<int>(i / trial.n_robots);
    const int r = static_cast<int>(i % trial.n_robots);
    check_row_key(states.rows[i], t, r, "states.csv");
    check_row_key(positions.rows[i], t, r, "positions.csv");
    check_row_key(kinematics.rows[i], t, r, "kinematics.csv");
    const auto s = parse_behaviour_state(states.rows[i][2]);
    if (!s) throw SchemaError(fmt::format("states.csv: unknown state '{}'", states.rows[i][2]));
    trial.robot_states.push_back(*s);
    trial.positions.push_back({parse_double(positions.rows[i][2], "positions.csv x_m"),
                               parse_double(positions.rows[i][3], "positions.csv y_m")});
    trial.speeds.push_back(parse_double(kinematics.rows[i][2], "kinematics.csv speed_m_s"));
    trial.in_deposit.push_back(parse_bool01(kinematics.rows[i][3], "kinematics.csv in_deposit") ? 1 : 0);
  }

  // dt is not part of the CSV schema; campaign.json carries it when present.
  trial.dt = 0.02;
  const fs::path meta = dir.parent_path() / "campaign.json";
  if (fs::exists(meta)) {
    const auto j = nlohmann::json::parse(read_text_file(meta), nullptr, false);
    if (!j.is_discarded() && j.contains("dt")) trial.dt = j["dt"].get<double>();
  }
  return trial;
}

TrialSummary summarize_trial(const TrialOutput& trial, const ZoneMap& zones) {
  TrialSummary s;
  for (int r = 0; r < trial.n_robots; ++r) {
    bool was_red = false;
    bool was_amber = false;
    for (int t = 0; t < trial.n_steps; ++t) {
      const Vec2 p = trial.position(t, r);
      const bool red = zones.in_red(p);
      const bool amber = zones.in_amber(p);
      if (red && !was_red) ++s.red_entries;
      if (amber && !was_amber) ++s.amber_entries;
      was_red = red;
      was_amber = amber;
    }
  }
  if (!trial.carrier_tally.empty()) s.deposits = trial.carrier_tally.back().deposited;
  return s;
}

std::vector<fs::path> campaign_trial_dirs(const fs::path& campaign_dir) {
  if (!fs::is_directory(campaign_dir)) throw CampaignError("campaign directory not found: " + campaign_dir.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(campaign_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("trial_", 0) == 0) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw CampaignError("campaign directory has no trial_* subdirectories: " + campaign_dir.string());
  return dirs;
}

CampaignSummary run_campaign(const ScenarioConfig& config, int n_trials, std::uint64_t base_seed,
                             const fs::path& out_dir, const CampaignOptions& options) {
  if (n_trials <= 0) throw CampaignError("number of trials must be positive");
  const ZoneMap zones = build_zone_map(config);
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!options.force) {
      throw CampaignError("output directory " + out_dir.string() + " already exists (use --force)");
    }
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  CampaignSummary summary;
  summary.trials.resize(n_trials);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n_trials) return;
      try {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
        TrialOutput trial = run_trial(config, zones, seed);
        const fs::path dir = out_dir / fmt::format("trial_{:04d}", i);
        fs::create_directories(dir);
        const TrialFiles files = render(trial);
        write_text_file(dir / "counts.csv", files.counts);
        write_text_file(dir / "states.csv", files.states);
        write_text_file(dir / "positions.csv", files.positions);
        write_text_file(dir / "kinematics.csv", files.kinematics);
        TrialSummary ts = summarize_trial(trial, zones);
        ts.seed = seed;
        ts.checksum = checksum(files);
        summary.trials[i] = ts;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_trials;
      }
    }
  };

  const int jobs = std::clamp(options.jobs, 1, n_trials);
  std::vector<std::jthread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);

  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : summary.trials) {
    summary.total_deposits += t.deposits;
    summary.total_red_entries += t.red_entries;
    summary.total_amber_entries += t.amber_entries;
    if (t.red_entries > 0) ++summary.trials_with_red;
    trials.push_back({{"seed", t.seed},
                      {"checksum", t.checksum},
                      {"deposits", t.deposits},
                      {"red_entries", t.red_entries},
                      {"amber_entries", t.amber_entries}});
  }
  const nlohmann::json meta{{"n_trials", n_trials},
                            {"base_seed", base_seed},
                            {"dt", config.dt()},
                            {"n_robots", config.n_robots},
                            {"timesteps_per_trial", config.timesteps_per_trial},
                            {"total_deposits", summary.total_deposits},
                            {"total_red_entries", summary.total_red_entries},
                            {"total_amber_entries", summary.total_amber_entries},
                            {"trials_with_red", summary.trials_with_red},
                            {"trials", trials}};
  write_text_file(out_dir / "campaign.json", meta.dump(2) + "\n");
  save_scenario(config, out_dir / "scenario.json");
  return summary;
}

}  // namespace swarmvv
