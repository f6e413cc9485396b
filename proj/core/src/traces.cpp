#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/core.h>

#include "swarmvv/csv.hpp"
#include "swarmvv/pipeline.hpp"

namespace swarmvv {

std::vector<PositionRecord> read_position_records(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  require_header(table, {"robot_id", "t_s", "x_m", "y_m"}, path.string());
  std::vector<PositionRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string ctx = fmt::format("{} row {}", path.string(), i + 2);
    PositionRecord rec{parse_long(row[0], ctx), parse_double(row[1], ctx),
                       {parse_double(row[2], ctx), parse_double(row[3], ctx)}};
    if (rec.t_s < 0) throw SchemaError(ctx + ": negative timestamp");
    out.push_back(rec);
  }
  return out;
}

namespace {

std::vector<long> robot_ids_of(const std::vector<PositionRecord>& records) {
  std::vector<long> ids;
  for (const auto& r : records) ids.push_back(r.robot_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t robot_slot(const std::vector<long>& ids, long id) {
  return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
}

}  // namespace

PositionTrace hf_trace(const std::vector<PositionRecord>& records) {
  if (records.empty()) throw SchemaError("position file has no rows");
  PositionTrace trace;
  trace.period_s = 1.0;
  trace.robot_ids = robot_ids_of(records);
  long max_t = 0;
  for (const auto& r : records) {
    const double rounded = std::round(r.t_s);
    if (std::abs(r.t_s - rounded) > 1e-6) {
      throw SchemaError(fmt::format("timestamp {} is not on the 1 s grid", r.t_s));
    }
    max_t = std::max(max_t, static_cast<long>(rounded));
  }
  trace.n_samples = static_cast<int>(max_t + 1);
  trace.positions.assign(static_cast<std::size_t>(trace.n_samples) * trace.robot_ids.size(), std::nullopt);
  for (const auto& r : records) {
    const auto t = static_cast<std::size_t>(std::lround(r.t_s));
    auto& slot = trace.positions[t * trace.robot_ids.size() + robot_slot(trace.robot_ids, r.robot_id)];
    if (slot) throw SchemaError(fmt::format("duplicate sample for robot {} at t={}", r.robot_id, t));
    slot = r.pos;
  }
  return trace;
}

CleanSeries clean_positions(const PositionTrace& trace, const ZoneMap& zones, Source source,
                            const CleanOptions& options) {
  CleanSeries out;
  out.source = source;
  out.states_available = false;
  out.sample_period_s = trace.period_s;
  const int n = trace.n_robots();
  const int window = static_cast<int>(std::lround(options.stationary_window_s / trace.period_s));
  long gaps = 0;
  for (int t = 0; t < trace.n_samples; ++t) {
    CleanSample s;
    s.t = t;
    int in_red = 0;
    int in_amber = 0;
    int stationary = 0;
    for (int r = 0; r < n; ++r) {
      const auto& p = trace.at(t, r);
      if (!p) {
        ++gaps;
        out.warnings.push_back(fmt::format("robot {} has no position at t={}s; excluded", trace.robot_ids[r], t));
        continue;
      }
      const ZoneTag tag = classify_point(zones, *p);
      if (tag == ZoneTag::Red) ++in_red;
      if (tag == ZoneTag::Red || tag == ZoneTag::AmberOnly) ++in_amber;
      if (t >= window && !zones.in_deposit(*p)) {
        double path = 0.0;
        bool complete = true;
        for (int u = t - window + 1; u <= t && complete; ++u) {
          const auto& a = trace.at(u - 1, r);
          const auto& b = trace.at(u, r);
          if (!a || !b) {
            complete = false;
          } else {
            path += norm(*b - *a);
          }
        }
        if (complete && path < options.stationary_epsilon_m) ++stationary;
      }
    }
    s.flag[0] = in_red > 0;
    s.flag[1] = in_amber >= 2;
    s.flag[2] = in_amber >= 1;
    s.flag[3] = stationary > 0 && stationary >= options.density_fraction * n - 1e-12;
    for (int f = 0; f < kNumFlags; ++f) s.freq[f] = s.flag[f] ? 1.0 : 0.0;
    out.samples.push_back(s);
  }
  if (gaps > 0) out.warnings.insert(out.warnings.begin(), fmt::format("{} robot-samples missing", gaps));
  return out;
}

CleanSeries ingest_hf(const std::filesystem::path& csv, const ZoneMap& zones, const CleanOptions& options) {
  return clean_positions(hf_trace(read_position_records(csv)), zones, Source::HF, options);
}

PhysicalDownsample downsample_physical(const std::vector<PositionRecord>& records, const ZoneMap& zones,
                                       int duration_s, const CleanOptions& options) {
  if (records.empty()) throw SchemaError("position file has no rows");
  if (duration_s < 1) throw std::invalid_argument("duration must be at least one second");
  PhysicalDownsample out;
  PositionTrace& trace = out.trace;
  trace.period_s = 1.0;
  trace.n_samples = duration_s;
  trace.robot_ids = robot_ids_of(records);
  const std::size_t n = trace.robot_ids.size();
  trace.positions.assign(static_cast<std::size_t>(duration_s) * n, std::nullopt);

  std::vector<std::vector<PositionRecord>> per_robot(n);
  for (const auto& r : records) per_robot[robot_slot(trace.robot_ids, r.robot_id)].push_back(r);

  AvailabilityReport& rep = out.availability;
  rep.per_robot_max_gap_s.assign(n, 0.0);
  long covered = 0;
  for (std::size_t r = 0; r < n; ++r) {
    auto& samples = per_robot[r];
    std::stable_sort(samples.begin(), samples.end(),
                     [](const PositionRecord& a, const PositionRecord& b) { return a.t_s < b.t_s; });
    for (std::size_t i = 1; i < samples.size(); ++i) {
      rep.per_robot_max_gap_s[r] = std::max(rep.per_robot_max_gap_s[r], samples[i].t_s - samples[i - 1].t_s);
    }
    if (rep.per_robot_max_gap_s[r] > rep.max_gap_s) {
      rep.max_gap_s = rep.per_robot_max_gap_s[r];
      rep.max_gap_robot = trace.robot_ids[r];
    }

    for (int sec = 0; sec < duration_s; ++sec) {
      // First sample at or after the second, and its predecessor.
      auto it = std::lower_bound(samples.begin(), samples.end(), static_cast<double>(sec),
                                 [](const PositionRecord& a, double t) { return a.t_s < t; });
      const PositionRecord* best = nullptr;
      double best_d = 0.5 + 1e-12;
      if (it != samples.begin()) {
        const auto& prev = *std::prev(it);
        const double d = sec - prev.t_s;
        if (d <= best_d) {
          best = &prev;
          best_d = d;
        }
      }
      if (it != samples.end()) {
        const double d = it->t_s - sec;
        if (d < best_d || (best == nullptr && d <= best_d)) best = &*it;
      }
      if (best) {
        trace.positions[static_cast<std::size_t>(sec) * n + r] = best->pos;
        ++covered;
      } else {
        ++rep.missing_entries;
      }
    }
  }
  rep.coverage = static_cast<double>(covered) / (static_cast<double>(duration_s) * n);
  out.series = clean_positions(trace, zones, Source::PHYS, options);
  return out;
}

PhysicalDownsample downsample_physical(const std::filesystem::path& csv, const ZoneMap& zones, int duration_s,
                                       const CleanOptions& options) {
  return downsample_physical(read_position_records(csv), zones, duration_s, options);
}

std::string position_trace_csv(const PositionTrace& trace) {
  std::string out = "robot_id,t_s,x_m,y_m\n";
  for (int t = 0; t < trace.n_samples; ++t) {
    for (int r = 0; r < trace.n_robots(); ++r) {
      const auto& p = trace.at(t, r);
      if (!p) continue;
      out += fmt::format("{},{},{},{}\n", trace.robot_ids[r], fixed(t * trace.period_s, 3), fmt::format("{}", p->x),
                         fmt::format("{}", p->y));
    }
  }
  return out;
}

}  // namespace swarmvv
