#include "swarmvv/macro.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>
#include <json.hpp>

#include "swarmvv/csv.hpp"

namespace swarmvv {

void MacroParams::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(p_s) || !in_unit(p_p) || !in_unit(p_a)) {
    throw MacroError(fmt::format("probabilities must lie in [0,1] (P_s={}, P_p={}, P_a={})", p_s, p_p, p_a));
  }
  if (t_s < 1) throw MacroError("T_s must be at least 1");
  if (n < 1) throw MacroError("N must be at least 1");
}

PopulationVector::PopulationVector(int t_s) : t_s_(t_s) {
  if (t_s < 1) throw MacroError("T_s must be at least 1");
  data_.assign(3 * static_cast<std::size_t>(t_s) + 3 * static_cast<std::size_t>(t_s) * t_s, 0.0);
}

PopulationVector PopulationVector::all_searching(int t_s, double n) {
  PopulationVector p(t_s);
  p.main(BehaviourState::Searching, 0) = n;
  return p;
}

std::size_t PopulationVector::main_index(int chain, int k) const {
  if (k < 0 || k >= t_s_) throw std::out_of_range("sojourn index out of range");
  return static_cast<std::size_t>(chain) * t_s_ + k;
}

std::size_t PopulationVector::avoid_index(int chain, int m, int k) const {
  if (m < 0 || m >= t_s_ || k < 0 || k >= t_s_) throw std::out_of_range("avoidance index out of range");
  return 3 * static_cast<std::size_t>(t_s_) + (static_cast<std::size_t>(chain) * t_s_ + m) * t_s_ + k;
}

double& PopulationVector::main(BehaviourState s, int k) { return data_[main_index(static_cast<int>(main_state_of(s)), k)]; }
double PopulationVector::main(BehaviourState s, int k) const {
  return data_[main_index(static_cast<int>(main_state_of(s)), k)];
}
double& PopulationVector::avoid(BehaviourState s, int m, int k) {
  return data_[avoid_index(static_cast<int>(main_state_of(s)), m, k)];
}
double PopulationVector::avoid(BehaviourState s, int m, int k) const {
  return data_[avoid_index(static_cast<int>(main_state_of(s)), m, k)];
}

double PopulationVector::total() const {
  double sum = 0.0;
  for (double v : data_) sum += v;
  return sum;
}

std::array<double, kNumBehaviourStates> PopulationVector::aggregate() const {
  std::array<double, kNumBehaviourStates> out{};
  const std::size_t t = t_s_;
  for (int chain = 0; chain < 3; ++chain) {
    for (std::size_t k = 0; k < t; ++k) out[chain] += data_[chain * t + k];
    for (std::size_t i = 0; i < t * t; ++i) out[chain + 3] += data_[3 * t + chain * t * t + i];
  }
  return out;
}

bool PopulationVector::nonnegative() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0; });
}

PopulationVector step(const PopulationVector& pop, const MacroParams& params) {
  params.validate();
  const int T = pop.horizon();
  if (params.t_s != T) throw MacroError("population horizon does not match T_s");
  const double pa = params.p_a;
  auto cap = [T](int i) { return std::min(i, T - 1); };

  using S = BehaviourState;
  constexpr std::array<S, 3> chains{S::Searching, S::Pickup, S::Dropoff};
  // Probability of leaving each main state for the next one in the cycle.
  const std::array<double, 3> advance{params.p_s, params.p_p, 0.0};
  const std::array<S, 3> successor{S::Pickup, S::Dropoff, S::Searching};

  PopulationVector next(T);
  for (int c = 0; c < 3; ++c) {
    const S x = chains[c];
    for (int k = 0; k < T; ++k) {
      const double mass = pop.main(x, k);
      if (mass == 0.0) continue;
      if (x == S::Dropoff && k == T - 1) {
        // Dropoff completes after T_s steps: N_S0(k+1) = N_D{T_s-1}(k).
        next.main(S::Searching, 0) += mass;
        continue;
      }
      next.avoid(x, k, 0) += pa * mass;
      next.main(x, cap(k + 1)) += (1.0 - pa) * (1.0 - advance[c]) * mass;
      next.main(successor[c], 0) += (1.0 - pa) * advance[c] * mass;
    }
    for (int m = 0; m < T; ++m) {
      for (int j = 0; j < T; ++j) {
        const double mass = pop.avoid(x, m, j);
        if (mass == 0.0) continue;
        if (j == T - 1) {
          next.main(x, cap(m + 1)) += mass;
        } else {
          next.avoid(x, cap(m + 1), j + 1) += mass;
        }
      }
    }
  }

  const double before = pop.total();
  const double after = next.total();
  if (std::abs(after - before) > 1e-9 * std::max(1.0, std::abs(before))) {
    throw std::logic_error(fmt::format("population not conserved: {} -> {}", before, after));
  }
  return next;
}

std::vector<PopulationVector> evolve(const PopulationVector& pop0, const MacroParams& params, int steps) {
  if (steps < 0) throw MacroError("number of steps must be non-negative");
  std::vector<PopulationVector> traj;
  traj.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push_back(pop0);
  for (int i = 0; i < steps; ++i) traj.push_back(step(traj.back(), params));
  return traj;
}

MacroParams ParamEstimate::params() const {
  std::string missing;
  if (!p_s) missing += " P_s";
  if (!p_p) missing += " P_p";
  if (!p_a) missing += " P_a";
  if (!missing.empty()) throw MacroError("undefined parameter(s):" + missing + " (state never observed)");
  MacroParams p{*p_s, *p_p, *p_a, t_s, n};
  p.validate();
  return p;
}

namespace {

void accumulate(ParamEstimate& est, const std::vector<BehaviourState>& seq) {
  using S = BehaviourState;
  int run = 1;
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    const S from = seq[i];
    const S to = seq[i + 1];
    if (!is_avoidance(from)) {
      ++est.main_steps;
      if (is_avoidance(to)) ++est.main_to_avoidance;
    }
    if (from == S::Searching && (to == S::Searching || to == S::Pickup)) {
      ++est.searching_exits;
      if (to == S::Pickup) ++est.searching_to_pickup;
    }
    if (from == S::Pickup && (to == S::Pickup || to == S::Dropoff)) {
      ++est.pickup_exits;
      if (to == S::Dropoff) ++est.pickup_to_dropoff;
    }
    run = (to == from) ? run + 1 : 1;
    est.observed_max_sojourn = std::max(est.observed_max_sojourn, run);
  }
  if (!seq.empty()) est.observed_max_sojourn = std::max(est.observed_max_sojourn, 1);
}

void finish(ParamEstimate& est, int sojourn_cap) {
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  est.p_a = ratio(est.main_to_avoidance, est.main_steps);
  est.p_s = ratio(est.searching_to_pickup, est.searching_exits);
  est.p_p = ratio(est.pickup_to_dropoff, est.pickup_exits);
  est.t_s = std::max(1, std::min(est.observed_max_sojourn, sojourn_cap));
}

}  // namespace

ParamEstimate estimate_params(const std::vector<TrialOutput>& trials, int sojourn_cap) {
  if (trials.empty()) throw MacroError("cannot estimate parameters from an empty campaign");
  if (sojourn_cap < 1) throw MacroError("sojourn cap must be at least 1");
  ParamEstimate est;
  est.n = trials.front().n_robots;
  std::vector<BehaviourState> seq;
  for (const auto& trial : trials) {
    for (int r = 0; r < trial.n_robots; ++r) {
      seq.clear();
      for (int t = 0; t < trial.n_steps; ++t) seq.push_back(trial.state(t, r));
      accumulate(est, seq);
    }
  }
  finish(est, sojourn_cap);
  return est;
}

ParamEstimate estimate_params(const std::filesystem::path& campaign_dir, int sojourn_cap) {
  if (sojourn_cap < 1) throw MacroError("sojourn cap must be at least 1");
  const auto dirs = campaign_trial_dirs(campaign_dir);
  ParamEstimate est;
  for (const auto& dir : dirs) {
    const CsvTable states = read_csv(dir / "states.csv");
    require_header(states, {"t", "robot_id", "state"}, (dir / "states.csv").string());
    std::vector<std::vector<BehaviourState>> per_robot;
    for (const auto& row : states.rows) {
      const long r = parse_long(row[1], "states.csv robot_id");
      if (r < 0) throw SchemaError("states.csv: negative robot id");
      if (static_cast<std::size_t>(r) >= per_robot.size()) per_robot.resize(r + 1);
      const auto s = parse_behaviour_state(row[2]);
      if (!s) throw SchemaError(fmt::format("states.csv: unknown state '{}'", row[2]));
      per_robot[r].push_back(*s);
    }
    est.n = static_cast<int>(per_robot.size());
    for (const auto& seq : per_robot) accumulate(est, seq);
  }
  finish(est, sojourn_cap);
  return est;
}

std::string params_to_json(const MacroParams& p) {
  nlohmann::json j{{"P_s", p.p_s}, {"P_p", p.p_p}, {"P_a", p.p_a}, {"T_s", p.t_s}, {"N", p.n}};
  return j.dump(2) + "\n";
}

MacroParams params_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MacroError("parameter file is not a JSON object");
  MacroParams p;
  try {
    p.p_s = j.at("P_s").get<double>();
    p.p_p = j.at("P_p").get<double>();
    p.p_a = j.at("P_a").get<double>();
    p.t_s = j.at("T_s").get<int>();
    p.n = j.at("N").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw MacroError(std::string("parameter file: ") + e.what());
  }
  p.validate();
  return p;
}

MacroParams load_params(const std::filesystem::path& path) { return params_from_json(read_text_file(path)); }

std::string trajectory_csv(const std::vector<PopulationVector>& trajectory) {
  std::string out = "k,searching,pickup,dropoff,avoid_s,avoid_p,avoid_d,total\n";
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const auto a = trajectory[k].aggregate();
    out += fmt::format("{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", k, a[0], a[1], a[2], a[3],
                       a[4], a[5], trajectory[k].total());
  }
  return out;
}

double occupancy_mae(const std::vector<PopulationVector>& trajectory,
                     const std::vector<std::array<double, kNumBehaviourStates>>& reference) {
  const std::size_t n = std::min(trajectory.size(), reference.size());
  if (n == 0) throw MacroError("nothing to compare");
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto a = trajectory[k].aggregate();
    for (int s = 0; s < kNumBehaviourStates; ++s) sum += std::abs(a[s] - reference[k][s]);
  }
  return sum / static_cast<double>(n * kNumBehaviourStates);
}

}  // namespace swarmvv
