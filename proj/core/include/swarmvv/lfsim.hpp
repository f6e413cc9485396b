#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "swarmvv/scenario.hpp"

namespace swarmvv {

/// Per-robot controller state. The enumerator order fixes the column order of
/// counts.csv and the channel order used throughout the pipeline.
enum class BehaviourState : std::uint8_t {
  Searching = 0,
  Pickup = 1,
  Dropoff = 2,
  AvoidanceS = 3,
  AvoidanceP = 4,
  AvoidanceD = 5,
};

inline constexpr int kNumBehaviourStates = 6;
inline constexpr std::array<BehaviourState, kNumBehaviourStates> kAllBehaviourStates{
    BehaviourState::Searching,  BehaviourState::Pickup,     BehaviourState::Dropoff,
    BehaviourState::AvoidanceS, BehaviourState::AvoidanceP, BehaviourState::AvoidanceD};

const char* to_string(BehaviourState s);
std::optional<BehaviourState> parse_behaviour_state(std::string_view name);

/// Short channel name used in CSV headers ("searching", "avoid_s", ...).
const char* channel_name(BehaviourState s);

constexpr bool is_avoidance(BehaviourState s) { return static_cast<int>(s) >= 3; }
constexpr BehaviourState main_state_of(BehaviourState s) {
  return is_avoidance(s) ? static_cast<BehaviourState>(static_cast<int>(s) - 3) : s;
}
constexpr BehaviourState avoidance_of(BehaviourState s) {
  return is_avoidance(s) ? s : static_cast<BehaviourState>(static_cast<int>(s) + 3);
}

/// True when `from -> to` is an edge of the six-state controller graph
/// (self-loops included).
bool is_legal_transition(BehaviourState from, BehaviourState to);

struct RobotSnapshot {
  int robot_id = 0;
  int t = 0;
  BehaviourState state = BehaviourState::Searching;
  Vec2 position;
  Vec2 velocity;
  std::optional<int> carrying;
  bool in_deposit = false;
};

struct CarrierTally {
  int on_floor = 0;
  int carried = 0;
  int deposited = 0;
};

/// The four per-timestep datasets of one trial, stored row-major by timestep
/// (index = t * n_robots + robot).
struct TrialOutput {
  int n_robots = 0;
  int n_steps = 0;
  double dt = 0.0;
  std::vector<std::array<int, kNumBehaviourStates>> state_counts;
  std::vector<BehaviourState> robot_states;
  std::vector<Vec2> positions;
  std::vector<double> speeds;
  std::vector<std::uint8_t> in_deposit;
  std::vector<std::int8_t> carrying;       ///< -1 when empty; not written to CSV
  std::vector<CarrierTally> carrier_tally; ///< per timestep; not written to CSV

  [[nodiscard]] std::size_t index(int t, int robot) const {
    return static_cast<std::size_t>(t) * n_robots + robot;
  }
  [[nodiscard]] BehaviourState state(int t, int robot) const { return robot_states[index(t, robot)]; }
  [[nodiscard]] Vec2 position(int t, int robot) const { return positions[index(t, robot)]; }
  [[nodiscard]] RobotSnapshot snapshot(int t, int robot) const;
};

/// Runs one trial of `config.timesteps_per_trial` steps. Throws
/// std::logic_error if bodies overlap (a simulator bug, never a data issue).
TrialOutput run_trial(const ScenarioConfig& config, const ZoneMap& zones, std::uint64_t seed);

/// Writes counts.csv, states.csv, positions.csv and kinematics.csv into `dir`.
void write_trial_csv(const TrialOutput& trial, const std::filesystem::path& dir);

/// Reads a trial directory written by write_trial_csv. Numeric columns are
/// restored at the precision they were written with.
TrialOutput read_trial_csv(const std::filesystem::path& dir);

struct TrialSummary {
  std::uint64_t seed = 0;
  std::string checksum;  ///< FNV-1a 64 over the four CSV files, hex
  int deposits = 0;
  int red_entries = 0;
  int amber_entries = 0;
};

struct CampaignSummary {
  std::vector<TrialSummary> trials;
  long total_deposits = 0;
  long total_red_entries = 0;
  long total_amber_entries = 0;
  int trials_with_red = 0;
};

struct CampaignOptions {
  bool force = false;
  int jobs = 1;
};

class CampaignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs trials with seeds base_seed .. base_seed + n_trials - 1 and writes
/// one `trial_NNNN/` directory per trial plus `campaign.json` and the
/// scenario used into `out_dir`.
CampaignSummary run_campaign(const ScenarioConfig& config, int n_trials, std::uint64_t base_seed,
                             const std::filesystem::path& out_dir,
                             const CampaignOptions& options = {});

/// Lists trial directories of a campaign in index order.
std::vector<std::filesystem::path> campaign_trial_dirs(const std::filesystem::path& campaign_dir);

/// Counts zone entries (outside -> inside transitions, plus being inside at
/// t = 0) for every robot of a trial.
TrialSummary summarize_trial(const TrialOutput& trial, const ZoneMap& zones);

}  // namespace swarmvv
