#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "swarmvv/lfsim.hpp"
#include "swarmvv/scenario.hpp"

namespace swarmvv {

enum class Source { LF, HF, PHYS };

const char* to_string(Source s);
Source parse_source(std::string_view name);

/// Unsafe-situation flags in a fixed order shared by every series type.
enum class Flag { Red = 0, AmberCritical = 1, AmberSingle = 2, Density = 3 };
inline constexpr int kNumFlags = 4;
const char* flag_name(Flag f);

struct CleanSample {
  int t = 0;
  std::array<double, kNumBehaviourStates> p{};  ///< per-state occupancy probability
  std::array<bool, kNumFlags> flag{};
  std::array<double, kNumFlags> freq{};  ///< fraction of trials with the flag set

  [[nodiscard]] bool red_occupied() const { return flag[0]; }
  [[nodiscard]] bool amber_critical() const { return flag[1]; }
  [[nodiscard]] bool amber_single() const { return flag[2]; }
  [[nodiscard]] bool density_violation() const { return flag[3]; }
};

struct CleanSeries {
  Source source = Source::LF;
  bool states_available = true;
  double sample_period_s = 0.02;
  std::vector<CleanSample> samples;
  std::vector<std::string> warnings;
};

struct CleanOptions {
  double stationary_window_s = 10.0;
  double stationary_epsilon_m = 0.01;  ///< max path length inside the window
  double density_fraction = 0.10;
};

/// Per-timestep flags and probabilities for one LF trial. Throws SchemaError
/// if counts disagree with per-robot states, CorruptTraceError for positions
/// outside the arena.
CleanSeries clean_trial(const TrialOutput& trial, const ZoneMap& zones, const CleanOptions& options = {});

/// Cleans every trial of a campaign directory, in trial order.
std::vector<CleanSeries> clean_campaign(const std::filesystem::path& campaign_dir, const ZoneMap& zones,
                                        const CleanOptions& options = {});

/// Keeps every `stride`-th sample; flags are OR-ed over each window and a
/// trailing partial window is folded into the last sample.
CleanSeries downsample(const CleanSeries& series, int stride);
inline CleanSeries downsample_lf(const CleanSeries& series) { return downsample(series, 50); }

/// Arithmetic mean of probabilities; flags become frequencies and are set
/// when any trial had them.
CleanSeries average_trials(const std::vector<CleanSeries>& series_list);

struct DiscreteSample {
  int t = 0;
  std::array<int, kNumBehaviourStates> level{};  ///< 1..n_bins, 0 when unavailable
  std::array<double, kNumBehaviourStates> p{};
  std::array<bool, kNumFlags> flag{};
  std::array<double, kNumFlags> freq{};
};

struct DiscreteSeries {
  Source source = Source::LF;
  bool levels_available = true;
  int n_bins = 5;
  double sample_period_s = 1.0;
  /// Per channel, n_bins + 1 ascending edges.
  std::array<std::vector<double>, kNumBehaviourStates> edges;
  std::vector<DiscreteSample> samples;
  std::vector<std::string> warnings;
};

/// Bin index in 1..edges.size()-1 for `value`; intervals are right-open
/// except the last, which is closed. Values outside the edges clamp.
int level_for(const std::vector<double>& edges, double value);

/// Equal-width discretization of each probability channel over its observed
/// [min, max]. Constant channels map to level 1 and add a warning.
DiscreteSeries discretize_ewd(const CleanSeries& series, int n_bins = 5);

/// Positions resampled onto a regular grid; missing entries are empty.
struct PositionTrace {
  double period_s = 1.0;
  int n_samples = 0;
  std::vector<long> robot_ids;
  std::vector<std::optional<Vec2>> positions;  ///< [t * robots + r]

  [[nodiscard]] int n_robots() const { return static_cast<int>(robot_ids.size()); }
  [[nodiscard]] const std::optional<Vec2>& at(int t, int r) const {
    return positions[static_cast<std::size_t>(t) * robot_ids.size() + r];
  }
};

/// Raw rows of a robot_id,t_s,x_m,y_m file.
struct PositionRecord {
  long robot_id = 0;
  double t_s = 0.0;
  Vec2 pos;
};
std::vector<PositionRecord> read_position_records(const std::filesystem::path& path);

/// Zone and density flags from a resampled trace. Robots without a position
/// at a sample are excluded from that sample and reported in warnings.
CleanSeries clean_positions(const PositionTrace& trace, const ZoneMap& zones, Source source,
                            const CleanOptions& options = {});

/// Loads a 1 Hz HF-format trace. State channels are marked unavailable.
CleanSeries ingest_hf(const std::filesystem::path& csv, const ZoneMap& zones, const CleanOptions& options = {});
PositionTrace hf_trace(const std::vector<PositionRecord>& records);

struct AvailabilityReport {
  double coverage = 0.0;  ///< fraction of robot-seconds with a sample within +-0.5 s
  double max_gap_s = 0.0;
  long max_gap_robot = -1;
  std::vector<double> per_robot_max_gap_s;
  long missing_entries = 0;
};

struct PhysicalDownsample {
  PositionTrace trace;
  CleanSeries series;
  AvailabilityReport availability;
};

/// Nearest-sample resampling of irregular recordings onto whole seconds
/// 0 .. duration_s - 1 (earlier sample wins ties).
PhysicalDownsample downsample_physical(const std::vector<PositionRecord>& records, const ZoneMap& zones,
                                       int duration_s = 200, const CleanOptions& options = {});
PhysicalDownsample downsample_physical(const std::filesystem::path& csv, const ZoneMap& zones,
                                       int duration_s = 200, const CleanOptions& options = {});

/// Renders a resampled trace back to robot_id,t_s,x_m,y_m rows.
std::string position_trace_csv(const PositionTrace& trace);

struct ZoneTimeStats {
  double red_s = 0.0;
  double amber_critical_s = 0.0;
  double amber_single_s = 0.0;
  int trials = 0;
};

/// Mean seconds per trial with each unsafe zone flag set.
ZoneTimeStats zone_time_stats(const std::vector<CleanSeries>& series_list);

// File formats.
std::string clean_csv(const CleanSeries& series);
CleanSeries parse_clean_csv(const std::string& text, const std::string& origin = "clean.csv");
std::string discrete_csv(const DiscreteSeries& series);
std::string bins_json(const DiscreteSeries& series);
/// Rebuilds a DiscreteSeries and checks every level against the stored edges.
DiscreteSeries parse_discrete(const std::string& discrete_text, const std::string& bins_text);

}  // namespace swarmvv
