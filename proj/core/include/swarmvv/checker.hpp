#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "swarmvv/markov.hpp"
#include "swarmvv/propspec.hpp"
#include "swarmvv/transient.hpp"

namespace swarmvv {

class CheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckResult {
  enum class Kind { Numeric, Boolean, Filter, Trace };
  Kind kind = Kind::Numeric;

  double value = 0.0;  ///< Numeric
  bool holds = false;  ///< Boolean and Trace
  double truncation = 0.0;

  FilterKind filter = FilterKind::Count;
  long count = 0;
  double sum = 0.0;
  std::optional<double> avg;                  ///< undefined for an empty satisfying set
  std::vector<std::pair<int, double>> printed;  ///< satisfying states and their values

  /// Counterexample (A[G]) or witness (E[F]); empty when none exists.
  std::vector<int> trace;
  bool counterexample = false;

  /// Value as written to result tables: a number, true/false, or for
  /// filters the aggregate selected by the filter kind.
  [[nodiscard]] std::string text() const;
  /// Scalar for plotting; booleans map to 0/1, print filters to the count.
  [[nodiscard]] double scalar() const;
};

/// Evaluates bound properties on one immutable model. Thread-safe for
/// concurrent const use.
class Checker {
 public:
  explicit Checker(const MarkovModel& model);

  [[nodiscard]] CheckResult check(const BoundProperty& p) const;

  [[nodiscard]] std::vector<bool> satisfying(const StateFormula& f) const;
  /// Per-state probability of the path formula (bounded or not).
  [[nodiscard]] std::vector<double> path_values(const PathFormula& f, double* truncation = nullptr) const;
  [[nodiscard]] std::vector<double> reward_values(const std::string& structure, RewardForm form, double t,
                                                  double* truncation = nullptr) const;
  /// Shortest path by transition count from `from` to a marked state; ties go
  /// to the smallest successor index. Empty when unreachable.
  [[nodiscard]] std::vector<int> shortest_path(int from, const std::vector<bool>& target) const;

  [[nodiscard]] const MarkovModel& model() const { return model_; }
  [[nodiscard]] const SparseCtmc& ctmc() const { return ctmc_; }

 private:
  std::vector<double> until_bounded(const std::vector<bool>& lhs, const std::vector<bool>& rhs, double lo, double hi,
                                    double* truncation) const;
  std::vector<double> until_unbounded(const std::vector<bool>& lhs, const std::vector<bool>& rhs) const;
  std::vector<double> steady_state(const std::vector<double>& reward) const;
  std::vector<bool> can_reach(const std::vector<bool>& target) const;

  const MarkovModel& model_;
  SparseCtmc ctmc_;
  std::vector<std::vector<int>> succ_;  ///< sorted distinct successors, self-loop for absorbing
  std::vector<std::vector<int>> pred_;
};

// Single-purpose entry points over a bound property.
double check_prob_bounded(const MarkovModel& m, const PathFormula& path);
double check_prob_unbounded(const MarkovModel& m, const PathFormula& path);
double check_reward(const MarkovModel& m, const std::string& structure, RewardForm form, double t = 0.0);
CheckResult check_filter(const MarkovModel& m, const Property& filter_property);
CheckResult check_ctl(const MarkovModel& m, const Property& ctl_property);

struct SweepSpec {
  std::string variable;
  double start = 0.0;
  double step = 1.0;
  double stop = 0.0;

  [[nodiscard]] std::vector<double> points() const;
};
/// Parses NAME=START:STEP:STOP (or NAME=VALUE for a single point).
SweepSpec parse_sweep(const std::string& text);

struct ExperimentResult {
  std::string variable;
  std::vector<double> points;
  std::vector<CheckResult> results;
  std::vector<std::string> warnings;
};

/// Evaluates `p` at every sweep point, binding the sweep variable on top of
/// `defines`. Throws CheckError if the property never mentions the variable.
ExperimentResult run_experiment(const MarkovModel& m, const Property& p, const SweepSpec& sweep,
                                const Defines& defines = {}, int jobs = 1);
std::string experiment_csv(const ExperimentResult& r);

/// Per-state counterexample/witness rendering: index and valuation per step.
std::string trace_csv(const MarkovModel& m, const std::vector<int>& trace);

}  // namespace swarmvv
