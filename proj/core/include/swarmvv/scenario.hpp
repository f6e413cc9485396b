#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace swarmvv {

/// Planar point or vector, metres (or m/s for velocities).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

double norm(Vec2 v);
double dot(Vec2 a, Vec2 b);

/// Closed axis-aligned rectangle in arena coordinates (metres).
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  [[nodiscard]] bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  [[nodiscard]] bool contains(const Rect& r) const {
    return r.x_min >= x_min && r.x_max <= x_max && r.y_min >= y_min && r.y_max <= y_max;
  }
  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }
  [[nodiscard]] double area() const { return width() * height(); }
  friend bool operator==(const Rect&, const Rect&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a trace point falls outside the arena.
class CorruptTraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cloakroom arena, robot and trial parameters. Lengths are in centimetres
/// where the field name says so; carrier positions are in metres with the
/// origin at the arena centre, x to the right and y upwards.
struct ScenarioConfig {
  double arena_width_cm = 370.0;
  double arena_height_cm = 370.0;
  int n_robots = 5;
  int n_carriers = 3;
  std::vector<Vec2> carrier_initial_positions_m{{-1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}};
  double robot_diameter_cm = 25.0;
  double carrier_diameter_cm = 33.0;
  double robot_max_speed_cm_s = 200.0;
  double camera_range_cm = 100.0;
  double ir_range_cm = 300.0;
  double avoidance_margin_cm = 5.0;
  double heading_resample_period_s = 0.4;
  double trial_duration_s = 200.0;
  int timesteps_per_trial = 10000;
  std::uint64_t rng_seed = 42;

  // Zone geometry.
  double red_width_cm = 85.0;
  double red_height_cm = 185.0;
  double amber_margin_cm = 50.0;
  double deposit_width_cm = 85.0;

  // Low-fidelity controller knobs not fixed by the scenario itself.
  bool dropoff_bias = true;
  double avoidance_turn_rate_deg_s = 90.0;
  double pickup_capture_radius_cm = 5.0;

  [[nodiscard]] double dt() const { return trial_duration_s / timesteps_per_trial; }
  [[nodiscard]] Rect arena() const;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// The published cloakroom configuration.
ScenarioConfig default_scenario();

/// Reduced configuration used by smoke tests (same dt, 1000 steps).
ScenarioConfig smoke_scenario();

ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);
std::string scenario_to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const std::string& text);

enum class ZoneTag { Red, AmberOnly, Deposit, Open };

const char* to_string(ZoneTag tag);

struct ZoneMap {
  Rect arena;
  Rect red;
  Rect amber;  ///< Enclosing rectangle; includes red.
  Rect deposit;
  Vec2 fire_exit_marker;

  [[nodiscard]] bool in_red(Vec2 p) const { return red.contains(p); }
  [[nodiscard]] bool in_amber(Vec2 p) const { return amber.contains(p); }
  [[nodiscard]] bool in_deposit(Vec2 p) const { return deposit.contains(p); }
};

/// Builds the red/amber/deposit rectangles. Throws ConfigError when a zone
/// does not fit inside the arena.
ZoneMap build_zone_map(const ScenarioConfig& config);

/// Priority-resolved zone tag (Red > AmberOnly > Deposit > Open) with closed
/// rectangles. Throws CorruptTraceError for points outside the arena.
ZoneTag classify_point(const ZoneMap& zones, Vec2 p);

}  // namespace swarmvv
