#include "swarmvv/lfsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include <fmt/core.h>

#include "swarmvv/csv.hpp"

namespace swarmvv {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOverlapTolerance = 1e-9;

constexpr std::array<const char*, kNumBehaviourStates> kStateNames{
    "Searching", "Pickup", "Dropoff", "AvoidanceS", "AvoidanceP", "AvoidanceD"};
constexpr std::array<const char*, kNumBehaviourStates> kChannelNames{
    "searching", "pickup", "dropoff", "avoid_s", "avoid_p", "avoid_d"};

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

Vec2 unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

enum class CarrierStatus { Floor, Reserved, Carried, Deposited };

struct Carrier {
  Vec2 pos;
  CarrierStatus status = CarrierStatus::Floor;
  int holder = -1;  // reserving or carrying robot
};

struct Robot {
  Vec2 pos;
  double heading = 0.0;
  BehaviourState state = BehaviourState::Searching;
  int target = -1;
  int carrying = -1;
  double remaining_turn = 0.0;  // signed radians still to rotate while avoiding
};

/// Nearest obstacle that triggers avoidance, as seen from one robot.
struct Trigger {
  bool hit = false;
  Vec2 direction;  // from the robot towards the obstacle
  double clearance = 0.0;
};

class Simulator {
 public:
  Simulator(const ScenarioConfig& config, const ZoneMap& zones, std::uint64_t seed)
      : config_(config), zones_(zones), rng_(seed) {
    robot_radius_ = config.robot_diameter_cm / 200.0;
    carrier_radius_ = config.carrier_diameter_cm / 200.0;
    margin_ = config.avoidance_margin_cm / 100.0;
    ir_range_ = config.ir_range_cm / 100.0;
    camera_range_ = config.camera_range_cm / 100.0;
    step_length_ = config.robot_max_speed_cm_s / 100.0 * config.dt();
    turn_step_ = config.avoidance_turn_rate_deg_s * kPi / 180.0 * config.dt();
    capture_radius_ = config.pickup_capture_radius_cm / 100.0;
    resample_steps_ = std::max(1, static_cast<int>(std::lround(config.heading_resample_period_s / config.dt())));

    for (int c = 0; c < config.n_carriers; ++c) carriers_.push_back({config.carrier_initial_positions_m[c]});
    place_robots();
  }

  TrialOutput run() {
    TrialOutput out;
    out.n_robots = config_.n_robots;
    out.n_steps = config_.timesteps_per_trial;
    out.dt = config_.dt();
    const auto cells = static_cast<std::size_t>(out.n_steps) * out.n_robots;
    out.state_counts.reserve(out.n_steps);
    out.robot_states.reserve(cells);
    out.positions.reserve(cells);
    out.speeds.reserve(cells);
    out.in_deposit.reserve(cells);
    out.carrying.reserve(cells);
    out.carrier_tally.reserve(out.n_steps);

    std::vector<double> speeds(robots_.size(), 0.0);
    record(out, speeds);
    for (int t = 1; t < out.n_steps; ++t) {
      for (std::size_t r = 0; r < robots_.size(); ++r) speeds[r] = update_robot(static_cast<int>(r), t);
      check_no_overlap(t);
      record(out, speeds);
    }
    return out;
  }

 private:
  double footprint(int r) const { return robots_[r].carrying >= 0 ? std::max(robot_radius_, carrier_radius_) : robot_radius_; }

  void place_robots() {
    const Rect& dep = zones_.deposit;
    std::uniform_real_distribution<double> ux(dep.x_min + robot_radius_, dep.x_max - robot_radius_);
    std::uniform_real_distribution<double> uy(dep.y_min + robot_radius_, dep.y_max - robot_radius_);
    std::uniform_real_distribution<double> uh(-kPi, kPi);
    for (int r = 0; r < config_.n_robots; ++r) {
      bool placed = false;
      for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
        Vec2 p{ux(rng_), uy(rng_)};
        placed = std::all_of(robots_.begin(), robots_.end(), [&](const Robot& o) {
                   return norm(o.pos - p) >= 2.0 * robot_radius_ + margin_;
                 }) &&
                 std::all_of(carriers_.begin(), carriers_.end(), [&](const Carrier& c) {
                   return norm(c.pos - p) >= robot_radius_ + carrier_radius_ + margin_;
                 });
        if (placed) robots_.push_back({p, uh(rng_)});
      }
      if (!placed) throw ConfigError("cannot place robots without overlap inside the deposit zone");
    }
  }

  // Obstacles a robot must keep clear of, excluding itself and its own target
  // or load. Calls fn(centre, radius).
  template <typename Fn>
  void for_each_obstacle(int r, Fn&& fn) const {
    for (std::size_t o = 0; o < robots_.size(); ++o) {
      if (static_cast<int>(o) != r) fn(robots_[o].pos, footprint(static_cast<int>(o)));
    }
    const Robot& self = robots_[r];
    for (std::size_t c = 0; c < carriers_.size(); ++c) {
      const Carrier& k = carriers_[c];
      if (k.status == CarrierStatus::Carried || k.status == CarrierStatus::Deposited) continue;
      if (static_cast<int>(c) == self.target) continue;
      fn(k.pos, carrier_radius_);
    }
  }

  Trigger find_trigger(int r, double heading) const {
    const Robot& self = robots_[r];
    const double radius = footprint(r);
    const Vec2 dir = unit(heading);
    Trigger best;
    best.clearance = std::numeric_limits<double>::infinity();
    auto consider = [&](Vec2 towards, double clearance) {
      if (clearance > margin_ || clearance > ir_range_) return;
      if (dot(dir, towards) <= 0.0) return;
      if (clearance < best.clearance) best = {true, towards, clearance};
    };
    for_each_obstacle(r, [&](Vec2 centre, double obstacle_radius) {
      const Vec2 d = centre - self.pos;
      const double dist = norm(d);
      if (dist <= 0.0) return;
      consider((1.0 / dist) * d, dist - radius - obstacle_radius);
    });
    const Rect& a = zones_.arena;
    consider({-1, 0}, self.pos.x - radius - a.x_min);
    consider({1, 0}, a.x_max - radius - self.pos.x);
    consider({0, -1}, self.pos.y - radius - a.y_min);
    consider({0, 1}, a.y_max - radius - self.pos.y);
    return best;
  }

  bool collides(int r, Vec2 p) const {
    const double radius = footprint(r);
    const Rect& a = zones_.arena;
    if (p.x - radius < a.x_min || p.x + radius > a.x_max || p.y - radius < a.y_min ||
        p.y + radius > a.y_max) {
      return true;
    }
    bool hit = false;
    for_each_obstacle(r, [&](Vec2 centre, double obstacle_radius) {
      if (norm(centre - p) < radius + obstacle_radius) hit = true;
    });
    return hit;
  }

  void begin_avoidance(int r, const Trigger& trig) {
    Robot& self = robots_[r];
    self.state = avoidance_of(main_state_of(self.state));
    std::uniform_real_distribution<double> angle(kPi / 2.0, kPi);
    const Vec2 h = unit(self.heading);
    const double side = h.x * trig.direction.y - h.y * trig.direction.x;
    double sign;
    if (side > 0) {
      sign = -1.0;  // obstacle on the left: turn clockwise
    } else if (side < 0) {
      sign = 1.0;
    } else {
      sign = std::bernoulli_distribution(0.5)(rng_) ? 1.0 : -1.0;
    }
    self.remaining_turn = sign * angle(rng_);
  }

  double desired_heading(int r, int t) {
    Robot& self = robots_[r];
    if (self.state == BehaviourState::Pickup) {
      const Vec2 d = carriers_[self.target].pos - self.pos;
      return std::atan2(d.y, d.x);
    }
    if (t % resample_steps_ == 0) {
      if (self.state == BehaviourState::Dropoff && config_.dropoff_bias) {
        // Deposit zone runs along the right wall.
        self.heading = std::uniform_real_distribution<double>(-kPi / 2.0, kPi / 2.0)(rng_);
      } else {
        self.heading = std::uniform_real_distribution<double>(-kPi, kPi)(rng_);
      }
    }
    return self.heading;
  }

  void detect_carrier(int r) {
    Robot& self = robots_[r];
    int best = -1;
    double best_dist = camera_range_;
    for (std::size_t c = 0; c < carriers_.size(); ++c) {
      if (carriers_[c].status != CarrierStatus::Floor) continue;
      const double d = norm(carriers_[c].pos - self.pos);
      if (d <= best_dist) {
        best = static_cast<int>(c);
        best_dist = d;
      }
    }
    if (best >= 0) {
      self.state = BehaviourState::Pickup;
      self.target = best;
      carriers_[best].status = CarrierStatus::Reserved;
      carriers_[best].holder = r;
    }
  }

  /// Advances robot r by one timestep; returns its speed over the step.
  double update_robot(int r, int t) {
    Robot& self = robots_[r];

    if (is_avoidance(self.state)) {
      if (self.remaining_turn != 0.0) {
        const double turn = std::clamp(self.remaining_turn, -turn_step_, turn_step_);
        self.heading = wrap_angle(self.heading + turn);
        self.remaining_turn -= turn;
        if (std::abs(self.remaining_turn) < 1e-12) self.remaining_turn = 0.0;
        return 0.0;
      }
      const Trigger trig = find_trigger(r, self.heading);
      if (trig.hit) {
        begin_avoidance(r, trig);
        return 0.0;
      }
      self.state = main_state_of(self.state);
      return advance(r, self.heading);
    }

    if (self.state == BehaviourState::Dropoff && zones_.deposit.contains(self.pos)) {
      Carrier& load = carriers_[self.carrying];
      load.status = CarrierStatus::Deposited;
      load.holder = -1;
      self.carrying = -1;
      self.state = BehaviourState::Searching;
      return 0.0;
    }

    if (self.state == BehaviourState::Searching) detect_carrier(r);

    if (self.state == BehaviourState::Pickup) {
      Carrier& target = carriers_[self.target];
      const double gap = norm(target.pos - self.pos);
      if (gap <= std::min(capture_radius_, step_length_)) {
        // Centre under the carrier so the loaded footprint never exceeds the
        // space the carrier already occupied.
        target.status = CarrierStatus::Carried;
        self.pos = target.pos;
        self.carrying = self.target;
        self.target = -1;
        self.state = BehaviourState::Dropoff;
        return gap / config_.dt();
      }
    }

    const double heading = desired_heading(r, t);
    if (self.state == BehaviourState::Pickup) self.heading = heading;
    const Trigger trig = find_trigger(r, heading);
    if (trig.hit) {
      begin_avoidance(r, trig);
      return 0.0;
    }
    return advance(r, heading);
  }

  double advance(int r, double heading) {
    Robot& self = robots_[r];
    double length = step_length_;
    if (self.state == BehaviourState::Pickup) {
      length = std::min(length, norm(carriers_[self.target].pos - self.pos));
    }
    const Vec2 next = self.pos + length * unit(heading);
    if (collides(r, next)) {
      // Blocked by something closing in from outside the look-ahead: treat as
      // a trigger from the direction of travel.
      begin_avoidance(r, Trigger{true, unit(heading), 0.0});
      return 0.0;
    }
    self.pos = next;
    if (self.carrying >= 0) carriers_[self.carrying].pos = next;
    return length / config_.dt();
  }

  void check_no_overlap(int t) const {
    for (std::size_t r = 0; r < robots_.size(); ++r) {
      const double radius = footprint(static_cast<int>(r));
      const Vec2 p = robots_[r].pos;
      const Rect& a = zones_.arena;
      if (p.x - radius < a.x_min - kOverlapTolerance || p.x + radius > a.x_max + kOverlapTolerance ||
          p.y - radius < a.y_min - kOverlapTolerance || p.y + radius > a.y_max + kOverlapTolerance) {
        throw std::logic_error(fmt::format("robot {} left the arena at step {}", r, t));
      }
      for_each_obstacle(static_cast<int>(r), [&](Vec2 centre, double obstacle_radius) {
        if (norm(centre - p) < radius + obstacle_radius - kOverlapTolerance) {
          throw std::logic_error(fmt::format("robot {} overlaps an obstacle at step {}", r, t));
        }
      });
    }
  }

  void record(TrialOutput& out, const std::vector<double>& speeds) const {
    std::array<int, kNumBehaviourStates> counts{};
    for (std::size_t r = 0; r < robots_.size(); ++r) {
      const Robot& self = robots_[r];
      ++counts[static_cast<int>(self.state)];
      out.robot_states.push_back(self.state);
      out.positions.push_back(self.pos);
      out.speeds.push_back(speeds[r]);
      out.in_deposit.push_back(zones_.deposit.contains(self.pos) ? 1 : 0);
      out.carrying.push_back(static_cast<std::int8_t>(self.carrying));
    }
    out.state_counts.push_back(counts);
    CarrierTally tally;
    for (const Carrier& c : carriers_) {
      switch (c.status) {
        case CarrierStatus::Floor:
        case CarrierStatus::Reserved: ++tally.on_floor; break;
        case CarrierStatus::Carried: ++tally.carried; break;
        case CarrierStatus::Deposited: ++tally.deposited; break;
      }
    }
    out.carrier_tally.push_back(tally);
  }

  const ScenarioConfig& config_;
  const ZoneMap& zones_;
  std::mt19937_64 rng_;
  std::vector<Robot> robots_;
  std::vector<Carrier> carriers_;
  double robot_radius_ = 0;
  double carrier_radius_ = 0;
  double margin_ = 0;
  double ir_range_ = 0;
  double camera_range_ = 0;
  double step_length_ = 0;
  double turn_step_ = 0;
  double capture_radius_ = 0;
  int resample_steps_ = 20;
};

}  // namespace

const char* to_string(BehaviourState s) { return kStateNames[static_cast<int>(s)]; }

const char* channel_name(BehaviourState s) { return kChannelNames[static_cast<int>(s)]; }

std::optional<BehaviourState> parse_behaviour_state(std::string_view name) {
  for (BehaviourState s : kAllBehaviourStates) {
    if (name == kStateNames[static_cast<int>(s)]) return s;
  }
  return std::nullopt;
}

bool is_legal_transition(BehaviourState from, BehaviourState to) {
  using S = BehaviourState;
  if (from == to) return true;
  if (is_avoidance(from) || is_avoidance(to)) return main_state_of(from) == main_state_of(to);
  return (from == S::Searching && to == S::Pickup) || (from == S::Pickup && to == S::Dropoff) ||
         (from == S::Dropoff && to == S::Searching);
}

RobotSnapshot TrialOutput::snapshot(int t, int robot) const {
  RobotSnapshot s;
  s.robot_id = robot;
  s.t = t;
  s.state = state(t, robot);
  s.position = position(t, robot);
  if (t > 0 && dt > 0) s.velocity = (1.0 / dt) * (s.position - position(t - 1, robot));
  const auto c = carrying.empty() ? -1 : carrying[index(t, robot)];
  if (c >= 0) s.carrying = c;
  s.in_deposit = in_deposit[index(t, robot)] != 0;
  return s;
}

TrialOutput run_trial(const ScenarioConfig& config, const ZoneMap& zones, std::uint64_t seed) {
  config.validate();
  Simulator sim(config, zones, seed);
  return sim.run();
}

}  // namespace swarmvv
