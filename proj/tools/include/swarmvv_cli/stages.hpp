#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <swarmvv/checker.hpp>
#include <swarmvv/markov.hpp>
#include <swarmvv/pipeline.hpp>
#include <swarmvv/propspec.hpp>
#include <swarmvv/scenario.hpp>

namespace swarmvv::cli {

namespace fs = std::filesystem;

/// Cleaned, downsampled and averaged series of one source plus its
/// zone-time statistics computed before downsampling.
struct SourceSeries {
  CleanSeries averaged;
  ZoneTimeStats stats;
  std::vector<std::string> warnings;
};

/// Cleans every trial of an LF campaign (in parallel up to `jobs`),
/// downsamples each with window-OR flags and averages them.
SourceSeries clean_lf_campaign(const fs::path& campaign_dir, const ZoneMap& zones, int stride, int jobs);

/// HF-format files, one per trial.
SourceSeries ingest_hf_files(const std::vector<fs::path>& files, const ZoneMap& zones);

struct PhysSeries {
  SourceSeries source;
  std::vector<PhysicalDownsample> trials;
};
PhysSeries downsample_phys_files(const std::vector<fs::path>& files, const ZoneMap& zones, int duration_s);

std::string stats_json(const ZoneTimeStats& stats, Source source);
ZoneTimeStats parse_stats_json(const std::string& text);

std::string availability_json(const std::vector<fs::path>& files, const std::vector<PhysicalDownsample>& trials);

/// Default pack: fire-exit, filter, reward, level and density properties; constants T, state and level.
const std::string& default_property_pack();

/// Defines used when checking the default pack on a per-state model.
Defines default_defines(const MarkovModel& model);

struct CheckRow {
  std::string name;
  std::string kind;
  std::string value;
  std::string details;  ///< relative to the results file, or empty
  bool violated = false;
  CheckResult result;
};

/// Checks every property; traces and printed filter states are written to
/// `details_dir / <prefix><name>.csv` and referenced relative to `base`.
std::vector<CheckRow> check_properties(const MarkovModel& model, const std::vector<NamedProperty>& props,
                                       const Defines& defines, const fs::path& base, const fs::path& details_dir,
                                       const std::string& prefix);

std::string results_csv(const std::vector<CheckRow>& rows);
std::string property_kind(const Property& p);

struct ResultRecord {
  std::string name;
  std::string kind;
  std::string value;
  std::string details;
};
std::vector<ResultRecord> read_results_csv(const fs::path& path);

/// Structured text report from a run directory. Throws if results.csv is
/// missing.
std::string render_report(const fs::path& run_dir);

}  // namespace swarmvv::cli
