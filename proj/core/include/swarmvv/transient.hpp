#pragma once

#include <utility>
#include <vector>

#include "swarmvv/markov.hpp"

namespace swarmvv {

/// Off-diagonal rates by source state; self-loops are dropped since they do
/// not change CTMC dynamics.
struct SparseCtmc {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> out;
  std::vector<double> exit;

  static SparseCtmc from_model(const MarkovModel& m);
  /// Removes every outgoing rate of the marked states.
  [[nodiscard]] SparseCtmc absorbing(const std::vector<bool>& mark) const;
  [[nodiscard]] double max_exit() const;
};

/// Poisson(lambda) probabilities on [left, right]; tails outside carry less
/// than `tail` mass in total. Weights are normalized to sum to one.
struct PoissonWeights {
  int left = 0;
  int right = 0;
  std::vector<double> w;
  double truncation = 0.0;  ///< bound on the discarded mass before normalizing
};
PoissonWeights poisson_weights(double lambda, double tail = 1e-12);

struct TransientResult {
  std::vector<double> values;
  double truncation = 0.0;
  int iterations = 0;
};

/// E[f(X_t) | X_0 = s] for every s, by uniformization.
TransientResult transient_backward(const SparseCtmc& c, const std::vector<double>& f, double t);

/// E[integral_0^t r(X_u) du | X_0 = s] for every s.
TransientResult cumulative_backward(const SparseCtmc& c, const std::vector<double>& r, double t);

/// Distribution at time t from `initial`.
TransientResult transient_forward(const SparseCtmc& c, const std::vector<double>& initial, double t);

}  // namespace swarmvv
