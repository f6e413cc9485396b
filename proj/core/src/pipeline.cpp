#include "swarmvv/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>
#include <json.hpp>

#include "swarmvv/csv.hpp"

namespace swarmvv {

namespace {

constexpr std::array<const char*, kNumFlags> kFlagNames{"red_occupied", "amber_critical", "amber_single",
                                                        "density_violation"};

void set_zone_flags(CleanSample& s, int in_red, int in_amber) {
  s.flag[0] = in_red > 0;
  s.flag[1] = in_amber >= 2;
  s.flag[2] = in_amber >= 1;
}

void flags_to_freq(CleanSample& s) {
  for (int f = 0; f < kNumFlags; ++f) s.freq[f] = s.flag[f] ? 1.0 : 0.0;
}

}  // namespace

const char* to_string(Source s) {
  switch (s) {
    case Source::LF: return "LF";
    case Source::HF: return "HF";
    case Source::PHYS: return "PHYS";
  }
  return "?";
}

Source parse_source(std::string_view name) {
  if (name == "LF") return Source::LF;
  if (name == "HF") return Source::HF;
  if (name == "PHYS") return Source::PHYS;
  throw SchemaError(fmt::format("unknown source '{}'", name));
}

const char* flag_name(Flag f) { return kFlagNames[static_cast<int>(f)]; }

CleanSeries clean_trial(const TrialOutput& trial, const ZoneMap& zones, const CleanOptions& options) {
  if (trial.n_steps <= 0 || trial.n_robots <= 0) throw SchemaError("trial has no data");
  if (trial.dt <= 0) throw SchemaError("trial has no timestep length");
  CleanSeries out;
  out.source = Source::LF;
  out.sample_period_s = trial.dt;
  out.samples.resize(trial.n_steps);

  const int window = static_cast<int>(std::lround(options.stationary_window_s / trial.dt));
  // Path length travelled by each robot over the trailing window, from speeds.
  std::vector<double> trailing(trial.n_robots, 0.0);

  for (int t = 0; t < trial.n_steps; ++t) {
    CleanSample& s = out.samples[t];
    s.t = t;
    std::array<int, kNumBehaviourStates> recount{};
    int in_red = 0;
    int in_amber = 0;
    int stationary = 0;
    for (int r = 0; r < trial.n_robots; ++r) {
      const auto i = trial.index(t, r);
      ++recount[static_cast<int>(trial.robot_states[i])];
      const Vec2 p = trial.positions[i];
      const ZoneTag tag = classify_point(zones, p);
      if (tag == ZoneTag::Red) ++in_red;
      if (tag == ZoneTag::Red || tag == ZoneTag::AmberOnly) ++in_amber;

      trailing[r] += trial.speeds[i] * trial.dt;
      if (t - window >= 0) {
        // Drop the step that left the window (t - window contributes the move
        // that ended at that sample, which precedes the window start).
        trailing[r] -= trial.speeds[trial.index(t - window, r)] * trial.dt;
      }
      if (t >= window && trailing[r] < options.stationary_epsilon_m && !trial.in_deposit[i]) ++stationary;
    }
    if (recount != trial.state_counts[t]) {
      throw SchemaError(fmt::format("counts.csv row {} disagrees with states.csv", t));
    }
    for (int k = 0; k < kNumBehaviourStates; ++k) s.p[k] = static_cast<double>(recount[k]) / trial.n_robots;
    set_zone_flags(s, in_red, in_amber);
    s.flag[3] = stationary > 0 && stationary >= options.density_fraction * trial.n_robots - 1e-12;
    flags_to_freq(s);
  }
  return out;
}

std::vector<CleanSeries> clean_campaign(const std::filesystem::path& campaign_dir, const ZoneMap& zones,
                                        const CleanOptions& options) {
  std::vector<CleanSeries> out;
  for (const auto& dir : campaign_trial_dirs(campaign_dir)) {
    try {
      out.push_back(clean_trial(read_trial_csv(dir), zones, options));
    } catch (const SchemaError& e) {
      throw SchemaError(dir.filename().string() + ": " + e.what());
    }
  }
  return out;
}

CleanSeries downsample(const CleanSeries& series, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be positive");
  if (series.samples.empty()) throw SchemaError("cannot downsample an empty series");
  CleanSeries out;
  out.source = series.source;
  out.states_available = series.states_available;
  out.sample_period_s = series.sample_period_s * stride;
  out.warnings = series.warnings;
  const std::size_t n = series.samples.size();
  const std::size_t n_out = std::max<std::size_t>(1, n / stride);
  if (n % stride != 0) {
    out.warnings.push_back(fmt::format("series length {} is not a multiple of {}; trailing {} samples folded into the last sample",
                                       n, stride, n % stride));
  }
  for (std::size_t i = 0; i < n_out; ++i) {
    const std::size_t begin = i * stride;
    const std::size_t end = (i + 1 == n_out) ? n : begin + stride;
    CleanSample s = series.samples[begin];
    s.t = static_cast<int>(i);
    for (std::size_t j = begin + 1; j < end; ++j) {
      for (int f = 0; f < kNumFlags; ++f) {
        s.flag[f] = s.flag[f] || series.samples[j].flag[f];
        s.freq[f] = std::max(s.freq[f], series.samples[j].freq[f]);
      }
    }
    out.samples.push_back(s);
  }
  return out;
}

CleanSeries average_trials(const std::vector<CleanSeries>& series_list) {
  if (series_list.empty()) throw SchemaError("nothing to average");
  const auto& first = series_list.front();
  for (const auto& s : series_list) {
    if (s.samples.size() != first.samples.size()) {
      throw SchemaError(fmt::format("series length mismatch: {} vs {}", s.samples.size(), first.samples.size()));
    }
    if (s.states_available != first.states_available) throw SchemaError("cannot average series with and without state data");
  }
  CleanSeries out;
  out.source = first.source;
  out.states_available = first.states_available;
  out.sample_period_s = first.sample_period_s;
  const double n = static_cast<double>(series_list.size());
  out.samples.resize(first.samples.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    CleanSample& s = out.samples[i];
    s.t = first.samples[i].t;
    for (const auto& series : series_list) {
      const CleanSample& x = series.samples[i];
      for (int k = 0; k < kNumBehaviourStates; ++k) s.p[k] += x.p[k];
      for (int f = 0; f < kNumFlags; ++f) s.freq[f] += x.freq[f];
    }
    for (int k = 0; k < kNumBehaviourStates; ++k) s.p[k] /= n;
    for (int f = 0; f < kNumFlags; ++f) {
      s.freq[f] /= n;
      s.flag[f] = s.freq[f] > 0.0;
    }
  }
  // Identical inputs must average to themselves bit-for-bit.
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    bool same = true;
    for (const auto& series : series_list) same = same && series.samples[i].p == first.samples[i].p;
    if (same) out.samples[i].p = first.samples[i].p;
  }
  return out;
}

int level_for(const std::vector<double>& edges, double value) {
  const int n = static_cast<int>(edges.size()) - 1;
  for (int b = 0; b < n - 1; ++b) {
    if (value < edges[b + 1]) return b + 1;
  }
  return n;
}

DiscreteSeries discretize_ewd(const CleanSeries& series, int n_bins) {
  if (series.samples.empty()) throw SchemaError("cannot discretize an empty series");
  if (n_bins < 1) throw std::invalid_argument("n_bins must be positive");
  DiscreteSeries out;
  out.source = series.source;
  out.levels_available = series.states_available;
  out.n_bins = n_bins;
  out.sample_period_s = series.sample_period_s;
  out.warnings = series.warnings;

  if (series.states_available) {
    for (int k = 0; k < kNumBehaviourStates; ++k) {
      double lo = series.samples.front().p[k];
      double hi = lo;
      for (const auto& s : series.samples) {
        lo = std::min(lo, s.p[k]);
        hi = std::max(hi, s.p[k]);
      }
      auto& e = out.edges[k];
      e.resize(n_bins + 1);
      if (hi == lo) {
        out.warnings.push_back(fmt::format("channel {} is constant ({}); all samples assigned L1",
                                           channel_name(kAllBehaviourStates[k]), lo));
        std::fill(e.begin(), e.end(), lo);
        continue;
      }
      const double width = (hi - lo) / n_bins;
      for (int b = 0; b < n_bins; ++b) e[b] = lo + b * width;
      e[n_bins] = hi;
    }
  }

  out.samples.reserve(series.samples.size());
  for (const auto& s : series.samples) {
    DiscreteSample d;
    d.t = s.t;
    d.p = s.p;
    d.flag = s.flag;
    d.freq = s.freq;
    if (series.states_available) {
      for (int k = 0; k < kNumBehaviourStates; ++k) {
        const auto& e = out.edges[k];
        d.level[k] = (e.front() == e.back()) ? 1 : level_for(e, s.p[k]);
      }
    }
    out.samples.push_back(d);
  }
  return out;
}

ZoneTimeStats zone_time_stats(const std::vector<CleanSeries>& series_list) {
  ZoneTimeStats st;
  st.trials = static_cast<int>(series_list.size());
  if (series_list.empty()) return st;
  for (const auto& series : series_list) {
    for (const auto& s : series.samples) {
      if (s.red_occupied()) st.red_s += series.sample_period_s;
      if (s.amber_critical()) st.amber_critical_s += series.sample_period_s;
      if (s.amber_single()) st.amber_single_s += series.sample_period_s;
    }
  }
  st.red_s /= st.trials;
  st.amber_critical_s /= st.trials;
  st.amber_single_s /= st.trials;
  return st;
}

// ---------------------------------------------------------------------------
// File formats

namespace {

std::vector<std::string> clean_header() {
  std::vector<std::string> h{"t"};
  for (auto s : kAllBehaviourStates) h.push_back(std::string("p_") + channel_name(s));
  for (auto f : kFlagNames) h.emplace_back(f);
  for (auto f : kFlagNames) h.push_back(std::string("freq_") + f);
  h.emplace_back("source");
  h.emplace_back("period_s");
  return h;
}

std::vector<std::string> discrete_header() {
  std::vector<std::string> h{"t"};
  for (auto s : kAllBehaviourStates) h.push_back(std::string("l_") + channel_name(s));
  for (auto s : kAllBehaviourStates) h.push_back(std::string("p_") + channel_name(s));
  for (auto f : kFlagNames) h.emplace_back(f);
  for (auto f : kFlagNames) h.push_back(std::string("freq_") + f);
  return h;
}

std::string join(const std::vector<std::string>& cols) {
  std::string s;
  for (const auto& c : cols) s += (s.empty() ? "" : ",") + c;
  return s;
}

// Probabilities are written with full round-trip precision.
std::string prob(double v) { return fmt::format("{}", v); }

}  // namespace

std::string clean_csv(const CleanSeries& series) {
  std::string out = join(clean_header()) + "\n";
  for (const auto& s : series.samples) {
    out += std::to_string(s.t);
    for (double p : s.p) out += "," + (series.states_available ? prob(p) : std::string("NA"));
    for (bool f : s.flag) out += f ? ",1" : ",0";
    for (double q : s.freq) out += "," + prob(q);
    out += std::string(",") + to_string(series.source) + "," + prob(series.sample_period_s) + "\n";
  }
  return out;
}

CleanSeries parse_clean_csv(const std::string& text, const std::string& origin) {
  const CsvTable table = parse_csv(text, origin);
  require_header(table, clean_header(), origin);
  CleanSeries out;
  if (table.rows.empty()) throw SchemaError(origin + ": no samples");
  out.source = parse_source(table.rows.front()[15]);
  out.states_available = table.rows.front()[1] != "NA";
  out.sample_period_s = parse_double(table.rows.front()[16], origin);
  for (const auto& row : table.rows) {
    CleanSample s;
    s.t = static_cast<int>(parse_long(row[0], origin));
    for (int k = 0; k < kNumBehaviourStates; ++k) {
      s.p[k] = out.states_available ? parse_double(row[1 + k], origin) : 0.0;
    }
    for (int f = 0; f < kNumFlags; ++f) {
      s.flag[f] = parse_bool01(row[7 + f], origin);
      s.freq[f] = parse_double(row[11 + f], origin);
    }
    out.samples.push_back(s);
  }
  return out;
}

std::string discrete_csv(const DiscreteSeries& series) {
  std::string out = join(discrete_header()) + "\n";
  for (const auto& s : series.samples) {
    out += std::to_string(s.t);
    for (int l : s.level) out += "," + (series.levels_available ? std::to_string(l) : std::string("NA"));
    for (double p : s.p) out += "," + (series.levels_available ? prob(p) : std::string("NA"));
    for (bool f : s.flag) out += f ? ",1" : ",0";
    for (double q : s.freq) out += "," + prob(q);
    out += "\n";
  }
  return out;
}

std::string bins_json(const DiscreteSeries& series) {
  nlohmann::json channels = nlohmann::json::object();
  if (series.levels_available) {
    for (auto s : kAllBehaviourStates) channels[channel_name(s)] = series.edges[static_cast<int>(s)];
  }
  nlohmann::json j{{"format", "swarmvv-bins/1"},
                   {"n_bins", series.n_bins},
                   {"source", to_string(series.source)},
                   {"sample_period_s", series.sample_period_s},
                   {"levels_available", series.levels_available},
                   {"edges", channels},
                   {"warnings", series.warnings}};
  return j.dump(2) + "\n";
}

DiscreteSeries parse_discrete(const std::string& discrete_text, const std::string& bins_text) {
  const auto bins = nlohmann::json::parse(bins_text, nullptr, false);
  if (bins.is_discarded() || !bins.is_object()) throw SchemaError("bins.json is not a JSON object");
  DiscreteSeries out;
  try {
    out.n_bins = bins.at("n_bins").get<int>();
    out.source = parse_source(bins.at("source").get<std::string>());
    out.sample_period_s = bins.at("sample_period_s").get<double>();
    out.levels_available = bins.at("levels_available").get<bool>();
    out.warnings = bins.at("warnings").get<std::vector<std::string>>();
    if (out.levels_available) {
      for (auto s : kAllBehaviourStates) {
        out.edges[static_cast<int>(s)] = bins.at("edges").at(channel_name(s)).get<std::vector<double>>();
        if (static_cast<int>(out.edges[static_cast<int>(s)].size()) != out.n_bins + 1) {
          throw SchemaError(fmt::format("bins.json: channel {} needs {} edges", channel_name(s), out.n_bins + 1));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bins.json: ") + e.what());
  }

  const CsvTable table = parse_csv(discrete_text, "discrete.csv");
  require_header(table, discrete_header(), "discrete.csv");
  for (const auto& row : table.rows) {
    DiscreteSample d;
    d.t = static_cast<int>(parse_long(row[0], "discrete.csv t"));
    for (int k = 0; k < kNumBehaviourStates; ++k) {
      if (out.levels_available) {
        d.level[k] = static_cast<int>(parse_long(row[1 + k], "discrete.csv level"));
        d.p[k] = parse_double(row[7 + k], "discrete.csv probability");
        const auto& e = out.edges[k];
        const int expected = (e.front() == e.back()) ? 1 : level_for(e, d.p[k]);
        if (d.level[k] != expected) {
          throw SchemaError(fmt::format("discrete.csv t={}: level {} of {} inconsistent with bin edges", d.t,
                                        d.level[k], channel_name(kAllBehaviourStates[k])));
        }
      }
    }
    for (int f = 0; f < kNumFlags; ++f) {
      d.flag[f] = parse_bool01(row[13 + f], "discrete.csv flag");
      d.freq[f] = parse_double(row[17 + f], "discrete.csv frequency");
    }
    out.samples.push_back(d);
  }
  if (out.samples.empty()) throw SchemaError("discrete.csv has no samples");
  return out;
}

}  // namespace swarmvv
