#include "swarmvv/checker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <thread>
#include <variant>

#include <fmt/core.h>

namespace swarmvv {

namespace {

constexpr double kBoundTolerance = 1e-9;
constexpr double kSolverTolerance = 1e-14;
constexpr long kMaxSweeps = 1000000;

double number_of(const Value& v, const char* what) {
  if (v.is_constant()) throw CheckError(fmt::format("{} '{}' is an unbound constant", what, v.name()));
  return v.number();
}

bool compare(int lhs, CmpOp op, double rhs) {
  const double l = lhs;
  switch (op) {
    case CmpOp::Eq: return l == rhs;
    case CmpOp::Ne: return l != rhs;
    case CmpOp::Lt: return l < rhs;
    case CmpOp::Le: return l <= rhs;
    case CmpOp::Gt: return l > rhs;
    case CmpOp::Ge: return l >= rhs;
  }
  return false;
}

std::vector<bool> negation(const std::vector<bool>& v) {
  std::vector<bool> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = !v[i];
  return out;
}

std::vector<double> indicator(const std::vector<bool>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] ? 1.0 : 0.0;
  return out;
}

}  // namespace

std::string CheckResult::text() const {
  switch (kind) {
    case Kind::Numeric: return fmt::format("{}", value);
    case Kind::Boolean:
    case Kind::Trace: return holds ? "true" : "false";
    case Kind::Filter:
      switch (filter) {
        case FilterKind::Count: return std::to_string(count);
        case FilterKind::Sum: return fmt::format("{}", sum);
        case FilterKind::Avg: return avg ? fmt::format("{}", *avg) : "undefined";
        case FilterKind::Print: return std::to_string(printed.size());
      }
  }
  return "";
}

double CheckResult::scalar() const {
  switch (kind) {
    case Kind::Numeric: return value;
    case Kind::Boolean:
    case Kind::Trace: return holds ? 1.0 : 0.0;
    case Kind::Filter:
      switch (filter) {
        case FilterKind::Count: return static_cast<double>(count);
        case FilterKind::Sum: return sum;
        case FilterKind::Avg: return avg.value_or(std::numeric_limits<double>::quiet_NaN());
        case FilterKind::Print: return static_cast<double>(printed.size());
      }
  }
  return 0.0;
}

Checker::Checker(const MarkovModel& model) : model_(model), ctmc_(SparseCtmc::from_model(model)) {
  if (auto problems = validate_model(model); !problems.empty()) {
    throw CheckError("cannot check an invalid model: " + problems.front());
  }
  const int n = model.n_states();
  succ_.resize(n);
  pred_.resize(n);
  for (const auto& t : model.transitions) succ_[t.from].push_back(t.to);
  for (int s : model.absorbing) succ_[s].push_back(s);
  for (int s = 0; s < n; ++s) {
    auto& row = succ_[s];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (int j : row) pred_[j].push_back(s);
  }
}

std::vector<bool> Checker::satisfying(const StateFormula& f) const {
  using K = StateFormula::Kind;
  const int n = model_.n_states();
  switch (f.kind) {
    case K::True: return std::vector<bool>(n, true);
    case K::False: return std::vector<bool>(n, false);
    case K::Label: {
      std::vector<bool> out(n, false);
      if (f.name == "init") {
        out[model_.initial] = true;
        return out;
      }
      const auto it = model_.labels.find(f.name);
      if (it == model_.labels.end()) throw CheckError("unknown label \"" + f.name + "\"");
      for (int s : it->second) out[s] = true;
      return out;
    }
    case K::Compare: {
      const int idx = model_.variable_index(f.name);
      if (idx < 0) throw CheckError("unknown variable " + f.name);
      const double rhs = number_of(f.rhs, "comparison value");
      std::vector<bool> out(n);
      for (int s = 0; s < n; ++s) out[s] = compare(model_.valuations[s][idx], f.op, rhs);
      return out;
    }
    case K::Not: return negation(satisfying(f.args.at(0)));
    case K::And:
    case K::Or: {
      auto a = satisfying(f.args.at(0));
      const auto b = satisfying(f.args.at(1));
      for (int s = 0; s < n; ++s) a[s] = f.kind == K::And ? (a[s] && b[s]) : (a[s] || b[s]);
      return a;
    }
  }
  return {};
}

std::vector<double> Checker::until_bounded(const std::vector<bool>& lhs, const std::vector<bool>& rhs, double lo,
                                           double hi, double* truncation) const {
  const int n = model_.n_states();
  std::vector<bool> stop(n);
  for (int s = 0; s < n; ++s) stop[s] = !lhs[s] || rhs[s];
  TransientResult x = transient_backward(ctmc_.absorbing(stop), indicator(rhs), hi - lo);
  double err = x.truncation;
  if (lo > 0.0) {
    std::vector<double> y(n);
    for (int s = 0; s < n; ++s) y[s] = lhs[s] ? x.values[s] : 0.0;
    TransientResult first = transient_backward(ctmc_.absorbing(negation(lhs)), y, lo);
    err += first.truncation;
    x.values = std::move(first.values);
  }
  if (truncation) *truncation = std::max(*truncation, err);
  return x.values;
}

std::vector<double> Checker::until_unbounded(const std::vector<bool>& lhs, const std::vector<bool>& rhs) const {
  const int n = model_.n_states();
  // States that can reach rhs through lhs states.
  std::vector<bool> reach = rhs;
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    if (rhs[s]) queue.push_back(s);
  }
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    for (int p : pred_[s]) {
      if (!reach[p] && lhs[p]) {
        reach[p] = true;
        queue.push_back(p);
      }
    }
  }
  std::vector<double> x(n, 0.0);
  std::vector<int> unknown;
  for (int s = n - 1; s >= 0; --s) {
    if (rhs[s]) {
      x[s] = 1.0;
    } else if (reach[s]) {
      unknown.push_back(s);
    }
  }
  double delta = 0.0;
  for (long sweep = 0; sweep < kMaxSweeps; ++sweep) {
    delta = 0.0;
    for (int s : unknown) {
      double v = 0.0;
      for (const auto& [j, rate] : ctmc_.out[s]) v += rate * x[j];
      v /= ctmc_.exit[s];
      delta = std::max(delta, std::abs(v - x[s]));
      x[s] = v;
    }
    if (delta <= kSolverTolerance) return x;
  }
  throw CheckError(fmt::format("unbounded reachability did not converge; achieved tolerance {:.3g}", delta));
}

std::vector<bool> Checker::can_reach(const std::vector<bool>& target) const {
  std::vector<bool> reach = target;
  std::deque<int> queue;
  for (int s = 0; s < model_.n_states(); ++s) {
    if (target[s]) queue.push_back(s);
  }
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    for (int p : pred_[s]) {
      if (!reach[p]) {
        reach[p] = true;
        queue.push_back(p);
      }
    }
  }
  return reach;
}

std::vector<double> Checker::steady_state(const std::vector<double>& reward) const {
  const int n = model_.n_states();
  // Iterative Tarjan.
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0;
  int n_comp = 0;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<std::pair<int, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < succ_[v].size()) {
        const int w = succ_[v][i++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        const int done = v;
        if (low[done] == index[done]) {
          int w = -1;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = n_comp;
          } while (w != done);
          ++n_comp;
        }
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      }
    }
  }

  std::vector<bool> bottom(n_comp, true);
  for (int s = 0; s < n; ++s) {
    for (int j : succ_[s]) {
      if (comp[j] != comp[s]) bottom[comp[s]] = false;
    }
  }

  std::vector<double> result(n, 0.0);
  for (int c = 0; c < n_comp; ++c) {
    if (!bottom[c]) continue;
    std::vector<int> members;
    for (int s = 0; s < n; ++s) {
      if (comp[s] == c) members.push_back(s);
    }
    double average = 0.0;
    if (members.size() == 1) {
      average = reward[members[0]];
    } else {
      double q = 0.0;
      for (int s : members) q = std::max(q, ctmc_.exit[s]);
      q *= 1.05;
      std::vector<double> pi(n, 0.0), next(n, 0.0);
      for (int s : members) pi[s] = 1.0 / static_cast<double>(members.size());
      double delta = 1.0;
      for (long it = 0; it < kMaxSweeps && delta > kSolverTolerance; ++it) {
        for (int s : members) next[s] = pi[s] * (1.0 - ctmc_.exit[s] / q);
        for (int s : members) {
          for (const auto& [j, rate] : ctmc_.out[s]) next[j] += pi[s] * rate / q;
        }
        delta = 0.0;
        for (int s : members) {
          delta = std::max(delta, std::abs(next[s] - pi[s]));
          pi[s] = next[s];
        }
      }
      if (delta > kSolverTolerance) {
        throw CheckError(fmt::format("steady-state iteration did not converge; achieved tolerance {:.3g}", delta));
      }
      for (int s : members) average += pi[s] * reward[s];
    }
    if (average == 0.0) continue;
    std::vector<bool> in_c(n, false);
    for (int s : members) in_c[s] = true;
    const auto reach = until_unbounded(std::vector<bool>(n, true), in_c);
    for (int s = 0; s < n; ++s) result[s] += reach[s] * average;
  }
  return result;
}

std::vector<double> Checker::path_values(const PathFormula& f, double* truncation) const {
  const int n = model_.n_states();
  using K = PathFormula::Kind;
  if (f.kind == K::Next) {
    const auto phi = satisfying(f.args.at(0));
    std::vector<double> out(n, 0.0);
    for (int s = 0; s < n; ++s) {
      if (ctmc_.exit[s] == 0.0) {
        out[s] = phi[s] ? 1.0 : 0.0;
        continue;
      }
      double v = 0.0;
      for (const auto& [j, rate] : ctmc_.out[s]) v += phi[j] ? rate : 0.0;
      out[s] = v / ctmc_.exit[s];
    }
    return out;
  }
  if (f.kind == K::Globally) {
    PathFormula dual = f;
    dual.kind = K::Eventually;
    dual.args = {StateFormula::negate(f.args.at(0))};
    auto v = path_values(dual, truncation);
    for (double& x : v) x = std::clamp(1.0 - x, 0.0, 1.0);
    return v;
  }
  std::vector<bool> lhs(n, true);
  std::vector<bool> rhs;
  if (f.kind == K::Until) {
    lhs = satisfying(f.args.at(0));
    rhs = satisfying(f.args.at(1));
  } else {
    rhs = satisfying(f.args.at(0));
  }
  std::vector<double> v;
  switch (f.bound.kind) {
    case TimeBound::Kind::None: v = until_unbounded(lhs, rhs); break;
    case TimeBound::Kind::Upper: v = until_bounded(lhs, rhs, 0.0, number_of(f.bound.hi, "time bound"), truncation); break;
    case TimeBound::Kind::Interval: {
      const double lo = number_of(f.bound.lo, "time bound");
      const double hi = number_of(f.bound.hi, "time bound");
      if (lo > hi) throw CheckError("interval lower bound exceeds upper bound");
      v = until_bounded(lhs, rhs, lo, hi, truncation);
      break;
    }
  }
  for (double& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

std::vector<double> Checker::reward_values(const std::string& structure, RewardForm form, double t,
                                           double* truncation) const {
  const auto it = model_.rewards.find(structure);
  if (it == model_.rewards.end()) throw CheckError("unknown reward structure \"" + structure + "\"");
  const auto& r = it->second;
  switch (form) {
    case RewardForm::Cumulative: {
      auto res = cumulative_backward(ctmc_, r, t);
      if (truncation) *truncation = std::max(*truncation, res.truncation);
      return res.values;
    }
    case RewardForm::Instantaneous: {
      auto res = transient_backward(ctmc_, r, t);
      if (truncation) *truncation = std::max(*truncation, res.truncation);
      return res.values;
    }
    case RewardForm::SteadyState: return steady_state(r);
  }
  return {};
}

std::vector<int> Checker::shortest_path(int from, const std::vector<bool>& target) const {
  const int n = model_.n_states();
  std::vector<int> parent(n, -2);
  std::deque<int> queue{from};
  parent[from] = -1;
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    if (target[s]) {
      std::vector<int> path;
      for (int v = s; v >= 0; v = parent[v]) path.push_back(v);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int j : succ_[s]) {
      if (parent[j] == -2) {
        parent[j] = s;
        queue.push_back(j);
      }
    }
  }
  return {};
}

namespace {

using PerState = std::variant<std::vector<double>, std::vector<bool>>;

}  // namespace

CheckResult Checker::check(const BoundProperty& bp) const {
  const Property& p = bp.property;
  const int init = model_.initial;
  CheckResult r;

  auto per_state = [&](const Property& q, double* trunc) -> PerState {
    switch (q.kind) {
      case Property::Kind::Prob: {
        auto v = path_values(q.path, trunc);
        if (q.prob_bound == ProbBound::Query) return v;
        const double bound = number_of(q.threshold, "probability bound");
        std::vector<bool> out(v.size());
        for (std::size_t s = 0; s < v.size(); ++s) {
          out[s] = q.prob_bound == ProbBound::Geq ? v[s] >= bound - kBoundTolerance : v[s] <= bound + kBoundTolerance;
        }
        return out;
      }
      case Property::Kind::Reward: {
        const double t = q.reward_form == RewardForm::SteadyState ? 0.0 : number_of(q.time, "time bound");
        return reward_values(q.structure, q.reward_form, t, trunc);
      }
      case Property::Kind::State: return satisfying(q.formula);
      case Property::Kind::CtlInvariant: return negation(can_reach(negation(satisfying(q.formula))));
      case Property::Kind::CtlReach: return can_reach(satisfying(q.formula));
      case Property::Kind::Filter: throw CheckError("filters cannot be nested");
    }
    return std::vector<bool>{};
  };

  switch (p.kind) {
    case Property::Kind::Prob:
    case Property::Kind::Reward:
    case Property::Kind::State: {
      const PerState v = per_state(p, &r.truncation);
      if (const auto* num = std::get_if<std::vector<double>>(&v)) {
        r.kind = CheckResult::Kind::Numeric;
        r.value = (*num)[init];
      } else {
        r.kind = CheckResult::Kind::Boolean;
        r.holds = std::get<std::vector<bool>>(v)[init];
      }
      return r;
    }
    case Property::Kind::CtlInvariant: {
      r.kind = CheckResult::Kind::Trace;
      r.counterexample = true;
      r.trace = shortest_path(init, negation(satisfying(p.formula)));
      r.holds = r.trace.empty();
      return r;
    }
    case Property::Kind::CtlReach: {
      r.kind = CheckResult::Kind::Trace;
      r.trace = shortest_path(init, satisfying(p.formula));
      r.holds = !r.trace.empty();
      return r;
    }
    case Property::Kind::Filter: {
      r.kind = CheckResult::Kind::Filter;
      r.filter = p.filter;
      const PerState v = per_state(p.inner.at(0), &r.truncation);
      const std::vector<bool> domain =
          p.restrict_to.empty() ? std::vector<bool>(model_.n_states(), true) : satisfying(p.restrict_to[0]);
      for (int s = 0; s < model_.n_states(); ++s) {
        if (!domain[s]) continue;
        double value = 0.0;
        if (const auto* num = std::get_if<std::vector<double>>(&v)) {
          value = (*num)[s];
          if (!(value > 0.0)) continue;
        } else {
          if (!std::get<std::vector<bool>>(v)[s]) continue;
          value = 1.0;
        }
        r.printed.emplace_back(s, value);
        r.sum += value;
      }
      r.count = static_cast<long>(r.printed.size());
      if (r.count > 0) r.avg = r.sum / static_cast<double>(r.count);
      return r;
    }
  }
  return r;
}

double check_prob_bounded(const MarkovModel& m, const PathFormula& path) {
  if (path.kind != PathFormula::Kind::Next && path.bound.kind == TimeBound::Kind::None) {
    throw CheckError("unbounded path formula; use check_prob_unbounded");
  }
  return Checker(m).path_values(path)[m.initial];
}

double check_prob_unbounded(const MarkovModel& m, const PathFormula& path) {
  if (path.bound.kind != TimeBound::Kind::None) throw CheckError("bounded path formula; use check_prob_bounded");
  return Checker(m).path_values(path)[m.initial];
}

double check_reward(const MarkovModel& m, const std::string& structure, RewardForm form, double t) {
  return Checker(m).reward_values(structure, form, t)[m.initial];
}

CheckResult check_filter(const MarkovModel& m, const Property& filter_property) {
  if (filter_property.kind != Property::Kind::Filter) throw CheckError("not a filter property");
  return Checker(m).check(swarmvv::bind(filter_property, m));
}

CheckResult check_ctl(const MarkovModel& m, const Property& ctl_property) {
  if (ctl_property.kind != Property::Kind::CtlInvariant && ctl_property.kind != Property::Kind::CtlReach) {
    throw CheckError("not an A[G ...] or E[F ...] property");
  }
  return Checker(m).check(swarmvv::bind(ctl_property, m));
}

std::vector<double> SweepSpec::points() const {
  if (!(step > 0.0)) throw CheckError("sweep step must be positive");
  if (!(start <= stop)) throw CheckError("sweep start must not exceed stop");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw CheckError("sweep '" + text + "' is not NAME=START:STEP:STOP");
  SweepSpec s;
  s.variable = text.substr(0, eq);
  std::vector<double> parts;
  std::size_t pos = eq + 1;
  while (true) {
    const auto colon = text.find(':', pos);
    const std::string piece = text.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
    try {
      parts.push_back(parse_define("x=" + piece).second);
    } catch (const std::invalid_argument&) {
      throw CheckError("sweep '" + text + "' has a non-numeric part '" + piece + "'");
    }
    if (colon == std::string::npos) break;
    pos = colon + 1;
  }
  if (parts.size() == 1) {
    s.start = s.stop = parts[0];
  } else if (parts.size() == 3) {
    s.start = parts[0];
    s.step = parts[1];
    s.stop = parts[2];
  } else {
    throw CheckError("sweep '" + text + "' is not NAME=START:STEP:STOP");
  }
  (void)s.points();
  return s;
}

ExperimentResult run_experiment(const MarkovModel& m, const Property& p, const SweepSpec& sweep,
                                const Defines& defines, int jobs) {
  if (!constants_used(p).count(sweep.variable)) {
    throw CheckError(fmt::format("sweep variable {} is not used by the property", sweep.variable));
  }
  ExperimentResult out;
  out.variable = sweep.variable;
  out.points = sweep.points();
  out.results.resize(out.points.size());
  const Checker checker(m);

  std::vector<BoundProperty> bound;
  for (double x : out.points) {
    Defines d = defines;
    d.emplace_back(sweep.variable, x);
    bound.push_back(swarmvv::bind(p, m, d));
  }
  std::set<std::string> seen;
  for (const auto& b : bound) {
    for (const auto& w : b.warnings) {
      if (seen.insert(w).second) out.warnings.push_back(w);
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(out.points.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < out.points.size(); i = next++) {
      try {
        out.results[i] = checker.check(bound[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(out.points.size(), 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string experiment_csv(const ExperimentResult& r) {
  std::string out = r.variable + ",value\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) out += fmt::format("{},{}\n", r.points[i], r.results[i].text());
  return out;
}

std::string trace_csv(const MarkovModel& m, const std::vector<int>& trace) {
  std::string out = "step,state";
  for (const auto& v : m.variables) out += "," + v.name;
  out += "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += fmt::format("{},{}", i, trace[i]);
    for (int v : m.valuations.at(trace[i])) out += fmt::format(",{}", v);
    out += "\n";
  }
  return out;
}

}  // namespace swarmvv
