#include <algorithm>
#include <charconv>
#include <map>
#include <optional>

#include <fmt/core.h>
#include <json.hpp>

#include <swarmvv/csv.hpp>

#include "swarmvv_cli/stages.hpp"

namespace swarmvv::cli {

namespace {

constexpr const char* kSources[] = {"lf", "hf", "phys"};

struct SourceView {
  std::string key;
  std::map<std::string, ResultRecord> by_property;  // first model wins
  std::optional<ZoneTimeStats> stats;
};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string value_of(const SourceView& v, const std::string& prop) {
  const auto it = v.by_property.find(prop);
  return it == v.by_property.end() ? "-" : it->second.value;
}

// Six significant digits for display; non-numeric values pass through.
std::string shown(const std::string& value) {
  double d = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), d);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) return value;
  return fmt::format("{:.6g}", d);
}

std::string trace_summary(const fs::path& run_dir, const std::string& rel) {
  try {
    const CsvTable t = read_csv(run_dir / rel);
    const auto col = std::find(t.header.begin(), t.header.end(), "timestep");
    if (t.rows.empty()) return rel;
    std::string out = fmt::format("{} ({} states", rel, t.rows.size());
    if (col != t.header.end()) out += ", ends at timestep " + t.rows.back()[col - t.header.begin()];
    return out + ")";
  } catch (const std::exception&) {
    return rel + " (unreadable)";
  }
}

}  // namespace

std::string render_report(const fs::path& run_dir) {
  const fs::path results = run_dir / "results.csv";
  if (!fs::exists(results)) {
    throw SchemaError("run directory " + run_dir.string() + " is incomplete: results.csv is missing");
  }
  const auto rows = read_results_csv(results);

  std::vector<SourceView> views;
  for (const char* src : kSources) {
    SourceView v;
    v.key = src;
    const std::string prefix = std::string(src) + "/";
    for (const auto& r : rows) {
      if (r.name.rfind(prefix, 0) != 0) continue;
      const auto slash = r.name.rfind('/');
      v.by_property.emplace(r.name.substr(slash + 1), r);
    }
    const fs::path stats = run_dir / src / "stats.json";
    if (fs::exists(stats)) v.stats = parse_stats_json(read_text_file(stats));
    views.push_back(std::move(v));
  }
  auto present = [](const SourceView& v) { return !v.by_property.empty() || v.stats.has_value(); };

  std::string out = "swarm corroborative verification report\n";
  out += "=======================================\n\n";
  const fs::path manifest = run_dir / "manifest.json";
  if (fs::exists(manifest)) {
    const auto j = nlohmann::json::parse(read_text_file(manifest));
    if (j.contains("preset")) out += fmt::format("preset: {}\n", j["preset"].get<std::string>());
    if (j.contains("trials")) out += fmt::format("LF trials: {}\n", j["trials"].get<int>());
    if (j.contains("seed")) out += fmt::format("base seed: {}\n", j["seed"].get<std::uint64_t>());
    if (j.contains("config_hash")) out += fmt::format("config hash: {}\n", j["config_hash"].get<std::string>());
  }
  out += "sources:";
  for (const auto& v : views) out += fmt::format(" {}={}", upper(v.key), present(v) ? "present" : "no data");
  out += "\n\n";

  struct Req {
    const char* title;
    const char* invariant;
    const char* probability;
  };
  const Req reqs[] = {
      {"REQ 1  fire exit must not be blocked (no robot in the red zone)", "req1_invariant", "fire_exit_red"},
      {"REQ 2  fewer than 10% of robots stationary outside the delivery site", "req2_invariant", "density_violation"},
  };
  int violated = 0;
  for (const auto& req : reqs) {
    out += std::string(req.title) + "\n";
    for (const auto& v : views) {
      if (!present(v)) {
        out += fmt::format("  {:<5} no data\n", upper(v.key));
        continue;
      }
      const auto it = v.by_property.find(req.invariant);
      if (it == v.by_property.end()) {
        out += fmt::format("  {:<5} not checked\n", upper(v.key));
        continue;
      }
      const bool holds = it->second.value == "true";
      violated += !holds;
      out += fmt::format("  {:<5} {:<9} P(F<=T)={}", upper(v.key), holds ? "SATISFIED" : "VIOLATED",
                         shown(value_of(v, req.probability)));
      if (!holds && !it->second.details.empty()) {
        out += "  counterexample " + trace_summary(run_dir, it->second.details);
      }
      out += "\n";
    }
    out += "\n";
  }

  out += "Key probabilities at the horizon\n";
  out += fmt::format("  {:<5} {:>14} {:>16} {:>14} {:>14}\n", "src", "red", "amber_critical", "amber", "density");
  for (const auto& v : views) {
    if (v.by_property.empty()) continue;
    out += fmt::format("  {:<5} {:>14} {:>16} {:>14} {:>14}\n", upper(v.key), shown(value_of(v, "fire_exit_red")),
                       shown(value_of(v, "fire_exit_amber_critical")), shown(value_of(v, "fire_exit_amber")),
                       shown(value_of(v, "density_violation")));
  }
  out += "\nCumulative rewards at the horizon\n";
  out += fmt::format("  {:<5} {:>14} {:>14}  {}\n", "src", "main", "avoidance", "ordering");
  for (const auto& v : views) {
    if (v.by_property.empty()) continue;
    const std::string m = value_of(v, "main_reward");
    const std::string a = value_of(v, "avoidance_reward");
    std::string order = "-";
    try {
      const double md = std::stod(m);
      const double ad = std::stod(a);
      order = ad > md ? "avoidance > main" : (ad < md ? "main > avoidance" : "equal");
      if (md == 0.0 && ad == 0.0) order = "no state data";
    } catch (const std::exception&) {
    }
    out += fmt::format("  {:<5} {:>14} {:>14}  {}\n", upper(v.key), shown(m), shown(a), order);
  }
  out += "\nFilter over X \"unsafe_red\" (satisfying states)\n";
  out += fmt::format("  {:<5} {:>8} {:>8} {:>14}\n", "src", "count", "sum", "avg");
  for (const auto& v : views) {
    if (v.by_property.empty()) continue;
    out += fmt::format("  {:<5} {:>8} {:>8} {:>14}\n", upper(v.key), value_of(v, "red_next_count"),
                       value_of(v, "red_next_sum"), value_of(v, "red_next_avg"));
  }
  out += "\nZone-time statistics (mean seconds per trial)\n";
  out += fmt::format("  {:<5} {:>7} {:>10} {:>16} {:>14}\n", "src", "trials", "red", "amber_critical",
                     "amber_single");
  for (const auto& v : views) {
    if (!v.stats) {
      out += fmt::format("  {:<5} no data\n", upper(v.key));
      continue;
    }
    out += fmt::format("  {:<5} {:>7} {:>10.2f} {:>16.2f} {:>14.2f}\n", upper(v.key), v.stats->trials, v.stats->red_s,
                       v.stats->amber_critical_s, v.stats->amber_single_s);
  }

  const fs::path curves = run_dir / "curves";
  if (fs::is_directory(curves)) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(curves)) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    out += "\nCurves\n";
    for (const auto& f : files) out += "  curves/" + f + "\n";
  }

  long total_violations = 0;
  for (const auto& r : rows) {
    if ((r.kind == "probability_bound" || r.kind == "ctl_invariant" || r.kind == "state") && r.value == "false") {
      ++total_violations;
    }
  }
  out += fmt::format("\nAll results: results.csv ({} properties, {} false bounded/invariant checks, {} requirement "
                     "verdicts violated)\n",
                     rows.size(), total_violations, violated);
  return out;
}

}  // namespace swarmvv::cli
