#include "swarmvv/transient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarmvv {

SparseCtmc SparseCtmc::from_model(const MarkovModel& m) {
  SparseCtmc c;
  c.n = m.n_states();
  c.out.resize(c.n);
  c.exit.assign(c.n, 0.0);
  for (const auto& t : m.transitions) {
    if (t.from == t.to) continue;
    auto& row = c.out[t.from];
    auto it = std::find_if(row.begin(), row.end(), [&](const auto& e) { return e.first == t.to; });
    if (it == row.end()) {
      row.emplace_back(t.to, t.rate);
    } else {
      it->second += t.rate;
    }
    c.exit[t.from] += t.rate;
  }
  for (auto& row : c.out) std::sort(row.begin(), row.end());
  return c;
}

SparseCtmc SparseCtmc::absorbing(const std::vector<bool>& mark) const {
  SparseCtmc c = *this;
  for (int s = 0; s < n; ++s) {
    if (mark[s]) {
      c.out[s].clear();
      c.exit[s] = 0.0;
    }
  }
  return c;
}

double SparseCtmc::max_exit() const {
  double q = 0.0;
  for (double e : exit) q = std::max(q, e);
  return q;
}

PoissonWeights poisson_weights(double lambda, double tail) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("Poisson rate must be finite and >= 0");
  PoissonWeights pw;
  if (lambda == 0.0) {
    pw.w = {1.0};
    return pw;
  }
  const int mode = static_cast<int>(std::floor(lambda));
  const double w_mode = std::exp(-lambda + mode * std::log(lambda) - std::lgamma(mode + 1.0));
  // Terms below this are dropped; both tails decay faster than geometrically
  // beyond the cut, so the discarded mass stays far below `tail`.
  const double cut = tail * 1e-8;

  std::vector<double> left_part;
  double w = w_mode;
  int k = mode;
  while (k > 0) {
    const double next = w * k / lambda;
    if (next < cut) break;
    w = next;
    --k;
    left_part.push_back(w);
  }
  pw.left = k;
  double left_tail = 0.0;
  if (k > 0) left_tail = w * k / lambda * (1.0 / (1.0 - std::min(k / lambda, 0.999)));

  std::vector<double> right_part{w_mode};
  w = w_mode;
  k = mode;
  while (true) {
    const double next = w * lambda / (k + 1);
    if (next < cut && k + 1 > lambda) break;
    w = next;
    ++k;
    right_part.push_back(w);
  }
  pw.right = k;
  const double ratio = lambda / (k + 2);
  const double right_tail = w * lambda / (k + 1) / (1.0 - std::min(ratio, 0.999));

  pw.w.assign(left_part.rbegin(), left_part.rend());
  pw.w.insert(pw.w.end(), right_part.begin(), right_part.end());
  double total = 0.0;
  for (double x : pw.w) total += x;
  for (double& x : pw.w) x /= total;
  pw.truncation = left_tail + right_tail;
  return pw;
}

namespace {

// u <- P u with P = I + Q/q.
void step_backward(const SparseCtmc& c, double q, const std::vector<double>& u, std::vector<double>& out) {
  for (int s = 0; s < c.n; ++s) {
    double v = u[s];
    for (const auto& [j, rate] : c.out[s]) v += rate / q * (u[j] - u[s]);
    out[s] = v;
  }
}

// pi <- pi P.
void step_forward(const SparseCtmc& c, double q, const std::vector<double>& pi, std::vector<double>& out) {
  for (int s = 0; s < c.n; ++s) out[s] = pi[s] * (1.0 - c.exit[s] / q);
  for (int s = 0; s < c.n; ++s) {
    if (pi[s] == 0.0) continue;
    for (const auto& [j, rate] : c.out[s]) out[j] += pi[s] * rate / q;
  }
}

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("time bound must be finite and >= 0");
}

}  // namespace

TransientResult transient_backward(const SparseCtmc& c, const std::vector<double>& f, double t) {
  check_time(t);
  TransientResult r;
  const double q = c.max_exit();
  if (q == 0.0 || t == 0.0) {
    r.values = f;
    return r;
  }
  const PoissonWeights pw = poisson_weights(q * t);
  std::vector<double> u = f;
  std::vector<double> next(c.n);
  r.values.assign(c.n, 0.0);
  for (int k = 0; k <= pw.right; ++k) {
    if (k >= pw.left) {
      const double w = pw.w[k - pw.left];
      for (int s = 0; s < c.n; ++s) r.values[s] += w * u[s];
    }
    if (k == pw.right) break;
    step_backward(c, q, u, next);
    u.swap(next);
  }
  r.truncation = pw.truncation;
  r.iterations = pw.right;
  return r;
}

TransientResult cumulative_backward(const SparseCtmc& c, const std::vector<double>& rew, double t) {
  check_time(t);
  TransientResult r;
  const double q = c.max_exit();
  r.values.assign(c.n, 0.0);
  if (t == 0.0) return r;
  if (q == 0.0) {
    for (int s = 0; s < c.n; ++s) r.values[s] = rew[s] * t;
    return r;
  }
  const PoissonWeights pw = poisson_weights(q * t);
  std::vector<double> u = rew;
  std::vector<double> next(c.n);
  double cdf = 0.0;
  for (int k = 0; k <= pw.right; ++k) {
    if (k >= pw.left) cdf += pw.w[k - pw.left];
    const double coeff = std::max(0.0, 1.0 - cdf) / q;
    for (int s = 0; s < c.n; ++s) r.values[s] += coeff * u[s];
    if (k == pw.right) break;
    step_backward(c, q, u, next);
    u.swap(next);
  }
  double rmax = 0.0;
  for (double x : rew) rmax = std::max(rmax, x);
  r.truncation = pw.truncation * rmax * t;
  r.iterations = pw.right;
  return r;
}

TransientResult transient_forward(const SparseCtmc& c, const std::vector<double>& initial, double t) {
  check_time(t);
  TransientResult r;
  const double q = c.max_exit();
  if (q == 0.0 || t == 0.0) {
    r.values = initial;
    return r;
  }
  const PoissonWeights pw = poisson_weights(q * t);
  std::vector<double> pi = initial;
  std::vector<double> next(c.n);
  r.values.assign(c.n, 0.0);
  for (int k = 0; k <= pw.right; ++k) {
    if (k >= pw.left) {
      const double w = pw.w[k - pw.left];
      for (int s = 0; s < c.n; ++s) r.values[s] += w * pi[s];
    }
    if (k == pw.right) break;
    step_forward(c, q, pi, next);
    pi.swap(next);
  }
  r.truncation = pw.truncation;
  r.iterations = pw.right;
  return r;
}

}  // namespace swarmvv
