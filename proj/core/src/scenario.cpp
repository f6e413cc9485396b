#include "swarmvv/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include <json.hpp>

namespace swarmvv {

using nlohmann::json;

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

Rect ScenarioConfig::arena() const {
  const double hw = arena_width_cm / 200.0;
  const double hh = arena_height_cm / 200.0;
  return {-hw, hw, -hh, hh};
}

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid scenario: " + what);
  };
  require(arena_width_cm > 0 && arena_height_cm > 0, "arena dimensions must be positive");
  require(n_robots > 0, "n_robots must be positive");
  require(n_carriers >= 0, "n_carriers must be non-negative");
  require(static_cast<int>(carrier_initial_positions_m.size()) >= n_carriers,
          fmt::format("{} carriers requested but only {} initial positions given", n_carriers,
                      carrier_initial_positions_m.size()));
  require(robot_diameter_cm > 0 && carrier_diameter_cm > 0, "diameters must be positive");
  require(robot_max_speed_cm_s > 0, "robot_max_speed_cm_s must be positive");
  require(camera_range_cm > 0 && ir_range_cm > 0, "sensor ranges must be positive");
  require(avoidance_margin_cm > 0, "avoidance_margin_cm must be positive");
  require(heading_resample_period_s > 0, "heading_resample_period_s must be positive");
  require(trial_duration_s > 0, "trial_duration_s must be positive");
  require(timesteps_per_trial > 0, "timesteps_per_trial must be positive");
  require(red_width_cm > 0 && red_height_cm > 0 && amber_margin_cm >= 0 && deposit_width_cm > 0,
          "zone dimensions must be positive");
  require(avoidance_turn_rate_deg_s > 0, "avoidance_turn_rate_deg_s must be positive");
  require(pickup_capture_radius_cm > 0, "pickup_capture_radius_cm must be positive");
  const Rect a = arena();
  for (int i = 0; i < n_carriers; ++i) {
    require(a.contains(carrier_initial_positions_m[i]),
            fmt::format("carrier {} initial position lies outside the arena", i));
  }
}

ScenarioConfig default_scenario() { return ScenarioConfig{}; }

ScenarioConfig smoke_scenario() {
  ScenarioConfig c;
  c.timesteps_per_trial = 1000;
  c.trial_duration_s = 20.0;
  return c;
}

namespace {

json to_json_value(const ScenarioConfig& c) {
  json carriers = json::array();
  for (const auto& p : c.carrier_initial_positions_m) carriers.push_back({p.x, p.y});
  return json{
      {"arena_width_cm", c.arena_width_cm},
      {"arena_height_cm", c.arena_height_cm},
      {"n_robots", c.n_robots},
      {"n_carriers", c.n_carriers},
      {"carrier_initial_positions_m", carriers},
      {"robot_diameter_cm", c.robot_diameter_cm},
      {"carrier_diameter_cm", c.carrier_diameter_cm},
      {"robot_max_speed_cm_s", c.robot_max_speed_cm_s},
      {"camera_range_cm", c.camera_range_cm},
      {"ir_range_cm", c.ir_range_cm},
      {"avoidance_margin_cm", c.avoidance_margin_cm},
      {"heading_resample_period_s", c.heading_resample_period_s},
      {"trial_duration_s", c.trial_duration_s},
      {"timesteps_per_trial", c.timesteps_per_trial},
      {"rng_seed", c.rng_seed},
      {"red_width_cm", c.red_width_cm},
      {"red_height_cm", c.red_height_cm},
      {"amber_margin_cm", c.amber_margin_cm},
      {"deposit_width_cm", c.deposit_width_cm},
      {"dropoff_bias", c.dropoff_bias},
      {"avoidance_turn_rate_deg_s", c.avoidance_turn_rate_deg_s},
      {"pickup_capture_radius_cm", c.pickup_capture_radius_cm},
  };
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("field '{}': {}", key, e.what()));
    }
  }
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& config) {
  return to_json_value(config).dump(2) + "\n";
}

ScenarioConfig scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("scenario file must contain a JSON object");

  // Unknown keys are rejected so typos do not silently fall back to defaults.
  const json known = to_json_value(ScenarioConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown scenario field '{}'", key));
  }

  ScenarioConfig c;
  read_field(j, "arena_width_cm", c.arena_width_cm);
  read_field(j, "arena_height_cm", c.arena_height_cm);
  read_field(j, "n_robots", c.n_robots);
  read_field(j, "n_carriers", c.n_carriers);
  if (auto it = j.find("carrier_initial_positions_m"); it != j.end()) {
    c.carrier_initial_positions_m.clear();
    for (const auto& p : *it) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("carrier positions must be [x, y] pairs");
      c.carrier_initial_positions_m.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  }
  read_field(j, "robot_diameter_cm", c.robot_diameter_cm);
  read_field(j, "carrier_diameter_cm", c.carrier_diameter_cm);
  read_field(j, "robot_max_speed_cm_s", c.robot_max_speed_cm_s);
  read_field(j, "camera_range_cm", c.camera_range_cm);
  read_field(j, "ir_range_cm", c.ir_range_cm);
  read_field(j, "avoidance_margin_cm", c.avoidance_margin_cm);
  read_field(j, "heading_resample_period_s", c.heading_resample_period_s);
  read_field(j, "trial_duration_s", c.trial_duration_s);
  read_field(j, "timesteps_per_trial", c.timesteps_per_trial);
  read_field(j, "rng_seed", c.rng_seed);
  read_field(j, "red_width_cm", c.red_width_cm);
  read_field(j, "red_height_cm", c.red_height_cm);
  read_field(j, "amber_margin_cm", c.amber_margin_cm);
  read_field(j, "deposit_width_cm", c.deposit_width_cm);
  read_field(j, "dropoff_bias", c.dropoff_bias);
  read_field(j, "avoidance_turn_rate_deg_s", c.avoidance_turn_rate_deg_s);
  read_field(j, "pickup_capture_radius_cm", c.pickup_capture_radius_cm);
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  out << scenario_to_json(config);
}

const char* to_string(ZoneTag tag) {
  switch (tag) {
    case ZoneTag::Red: return "Red";
    case ZoneTag::AmberOnly: return "AmberOnly";
    case ZoneTag::Deposit: return "Deposit";
    case ZoneTag::Open: return "Open";
  }
  return "?";
}

ZoneMap build_zone_map(const ScenarioConfig& config) {
  config.validate();
  const Rect arena = config.arena();
  const double red_w = config.red_width_cm / 100.0;
  const double red_h = config.red_height_cm / 100.0;
  const double margin = config.amber_margin_cm / 100.0;
  const double dep_w = config.deposit_width_cm / 100.0;

  ZoneMap z;
  z.arena = arena;
  // Red sits in the bottom-left corner; amber grows it on the two interior sides.
  z.red = {arena.x_min, arena.x_min + red_w, arena.y_min, arena.y_min + red_h};
  z.amber = {arena.x_min, std::min(arena.x_max, z.red.x_max + margin), arena.y_min,
             std::min(arena.y_max, z.red.y_max + margin)};
  z.deposit = {arena.x_max - dep_w, arena.x_max, arena.y_min, arena.y_max};
  z.fire_exit_marker = {arena.x_min, (z.red.y_min + z.red.y_max) / 2.0};

  if (!arena.contains(z.red)) throw ConfigError("red zone does not fit in the arena");
  if (dep_w > arena.width()) throw ConfigError("deposit zone does not fit in the arena");
  if (z.amber.x_max >= z.deposit.x_min) throw ConfigError("amber zone overlaps the deposit zone");
  return z;
}

ZoneTag classify_point(const ZoneMap& zones, Vec2 p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !zones.arena.contains(p)) {
    throw CorruptTraceError(fmt::format("point ({}, {}) lies outside the arena", p.x, p.y));
  }
  if (zones.red.contains(p)) return ZoneTag::Red;
  if (zones.amber.contains(p)) return ZoneTag::AmberOnly;
  if (zones.deposit.contains(p)) return ZoneTag::Deposit;
  return ZoneTag::Open;
}

}  // namespace swarmvv
