#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmvv/lfsim.hpp"

namespace swarmvv {

/// Parameters of the six-state population model.
struct MacroParams {
  double p_s = 0.0;  ///< find a carrier
  double p_p = 0.0;  ///< pick up a carrier
  double p_a = 0.0;  ///< enter avoidance
  int t_s = 1;       ///< sojourn horizon in timesteps
  int n = 1;         ///< swarm size

  void validate() const;
  friend bool operator==(const MacroParams&, const MacroParams&) = default;
};

class MacroError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expected robot counts per (state, sojourn) compartment. Main chains are
/// indexed by k in [0, T_s); avoidance compartments by (m, k), where m is
/// the sojourn in the paired main state before avoidance began.
class PopulationVector {
 public:
  explicit PopulationVector(int t_s);

  /// All `n` robots in SEARCHING with sojourn 0.
  static PopulationVector all_searching(int t_s, double n);

  [[nodiscard]] int horizon() const { return t_s_; }

  double& main(BehaviourState s, int k);
  [[nodiscard]] double main(BehaviourState s, int k) const;
  double& avoid(BehaviourState s, int m, int k);
  [[nodiscard]] double avoid(BehaviourState s, int m, int k) const;

  [[nodiscard]] double total() const;
  /// Expected count per behaviour state (summed over sojourn indices).
  [[nodiscard]] std::array<double, kNumBehaviourStates> aggregate() const;
  [[nodiscard]] bool nonnegative() const;

  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  friend bool operator==(const PopulationVector&, const PopulationVector&) = default;

 private:
  [[nodiscard]] std::size_t main_index(int chain, int k) const;
  [[nodiscard]] std::size_t avoid_index(int chain, int m, int k) const;

  int t_s_;
  std::vector<double> data_;  // 3 main chains of T_s, then 3 avoidance blocks of T_s^2
};

/// One synchronous update of the difference equations. Throws
/// std::logic_error when the total drifts by more than 1e-9.
PopulationVector step(const PopulationVector& pop, const MacroParams& params);

/// Returns [pop0, step(pop0), ...] of length steps + 1.
std::vector<PopulationVector> evolve(const PopulationVector& pop0, const MacroParams& params, int steps);

struct ParamEstimate {
  std::optional<double> p_s;
  std::optional<double> p_p;
  std::optional<double> p_a;
  int t_s = 1;
  int n = 1;
  long main_steps = 0;
  long main_to_avoidance = 0;
  long searching_exits = 0;  ///< Searching -> {Searching, Pickup}
  long searching_to_pickup = 0;
  long pickup_exits = 0;     ///< Pickup -> {Pickup, Dropoff}
  long pickup_to_dropoff = 0;
  int observed_max_sojourn = 0;

  /// Throws MacroError naming every undefined probability.
  [[nodiscard]] MacroParams params() const;
};

/// Frequency estimates from per-robot state sequences. `sojourn_cap` bounds
/// T_s (the horizon drives a T_s^2 state space).
ParamEstimate estimate_params(const std::vector<TrialOutput>& trials, int sojourn_cap);

/// Same, reading states.csv from every trial of a campaign directory.
ParamEstimate estimate_params(const std::filesystem::path& campaign_dir, int sojourn_cap);

std::string params_to_json(const MacroParams& params);
MacroParams params_from_json(const std::string& text);
MacroParams load_params(const std::filesystem::path& path);

/// CSV with columns k,searching,pickup,dropoff,avoid_s,avoid_p,avoid_d,total.
std::string trajectory_csv(const std::vector<PopulationVector>& trajectory);

/// Mean absolute difference between aggregated trajectory counts and
/// reference per-step counts, averaged over steps and the six states.
double occupancy_mae(const std::vector<PopulationVector>& trajectory,
                     const std::vector<std::array<double, kNumBehaviourStates>>& reference);

}  // namespace swarmvv
