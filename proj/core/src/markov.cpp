#include "swarmvv/markov.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "swarmvv/csv.hpp"

namespace swarmvv {

namespace {

constexpr const char* kFormatLine = "swarmvv-ctmc 1";

// Model `s` ids indexed by BehaviourState.
constexpr std::array<int, kNumBehaviourStates> kModelIds{1, 2, 4, 0, 3, 5};

}  // namespace

int MarkovModel::variable_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int MarkovModel::value(int state, const std::string& variable) const {
  const int i = variable_index(variable);
  if (i < 0) throw ModelError("unknown variable " + variable);
  return valuations.at(state).at(i);
}

int model_state_id(BehaviourState s) { return kModelIds[static_cast<int>(s)]; }

BehaviourState behaviour_from_model_id(int id) {
  for (BehaviourState s : kAllBehaviourStates) {
    if (model_state_id(s) == id) return s;
  }
  throw ModelError(fmt::format("no behaviour state has model id {}", id));
}

MarkovModel build_model(const DiscreteSeries& series, BuildMode mode, BehaviourState state) {
  if (series.samples.empty()) throw ModelError("cannot build a model from an empty series");
  const int n = static_cast<int>(series.samples.size());
  const int channel = static_cast<int>(state);

  MarkovModel m;
  if (mode == BuildMode::PerStateChain) {
    m.variables = {{"s", 0, kNumBehaviourStates - 1}, {"l", 0, series.n_bins}, {"timestep", 0, n}};
  } else {
    for (BehaviourState s : kAllBehaviourStates) {
      m.variables.push_back({std::string("l_") + channel_name(s), 0, series.n_bins});
    }
    m.variables.push_back({"timestep", 0, n});
  }

  std::vector<double> main_reward(n + 1, 0.0);
  std::vector<double> avoid_reward(n + 1, 0.0);
  std::array<std::vector<int>, kNumFlags> flagged;

  for (int i = 0; i < n; ++i) {
    const DiscreteSample& d = series.samples[i];
    const auto level = [&](int k) { return series.levels_available ? d.level[k] : 0; };
    if (mode == BuildMode::PerStateChain) {
      m.valuations.push_back({model_state_id(state), level(channel), i});
    } else {
      std::vector<int> v;
      for (int k = 0; k < kNumBehaviourStates; ++k) v.push_back(level(k));
      v.push_back(i);
      m.valuations.push_back(std::move(v));
    }
    if (series.levels_available) {
      main_reward[i] = d.p[0] + d.p[1] + d.p[2];
      avoid_reward[i] = d.p[3] + d.p[4] + d.p[5];
    }
    for (int f = 0; f < kNumFlags; ++f) {
      if (d.flag[f]) flagged[f].push_back(i);
    }
    m.transitions.push_back({i, i + 1, 1.0});
  }

  // Terminal state: level 0, timestep n.
  if (mode == BuildMode::PerStateChain) {
    m.valuations.push_back({model_state_id(state), 0, n});
  } else {
    std::vector<int> v(kNumBehaviourStates, 0);
    v.push_back(n);
    m.valuations.push_back(std::move(v));
  }
  m.absorbing = {n};
  m.initial = 0;

  m.labels["unsafe_red"] = flagged[static_cast<int>(Flag::Red)];
  m.labels["unsafe_fireexitsblocked"] = flagged[static_cast<int>(Flag::Red)];
  m.labels["unsafe_amber_critical"] = flagged[static_cast<int>(Flag::AmberCritical)];
  m.labels["unsafe_amber"] = flagged[static_cast<int>(Flag::AmberSingle)];
  m.labels["density_violation"] = flagged[static_cast<int>(Flag::Density)];
  m.rewards["main_states"] = std::move(main_reward);
  m.rewards["avoidance_states"] = std::move(avoid_reward);

  if (auto problems = validate_model(m); !problems.empty()) {
    throw ModelError("built model is invalid: " + problems.front());
  }
  return m;
}

std::vector<std::string> validate_model(const MarkovModel& m) {
  std::vector<std::string> out;
  const int n = m.n_states();
  auto in_range = [n](int s) { return s >= 0 && s < n; };
  if (n == 0) out.emplace_back("model has no states");
  if (!in_range(m.initial)) out.push_back(fmt::format("initial state {} does not exist", m.initial));

  std::set<std::string> names;
  for (const auto& v : m.variables) {
    if (!names.insert(v.name).second) out.push_back("duplicate variable " + v.name);
    if (v.lo > v.hi) out.push_back(fmt::format("variable {} has empty range {}..{}", v.name, v.lo, v.hi));
  }
  for (int s = 0; s < n; ++s) {
    const auto& val = m.valuations[s];
    if (val.size() != m.variables.size()) {
      out.push_back(fmt::format("state {} has {} values for {} variables", s, val.size(), m.variables.size()));
      continue;
    }
    for (std::size_t v = 0; v < val.size(); ++v) {
      if (val[v] < m.variables[v].lo || val[v] > m.variables[v].hi) {
        out.push_back(fmt::format("state {}: {}={} outside {}..{}", s, m.variables[v].name, val[v],
                                  m.variables[v].lo, m.variables[v].hi));
      }
    }
  }

  std::vector<int> out_degree(std::max(n, 0), 0);
  for (std::size_t i = 0; i < m.transitions.size(); ++i) {
    const Transition& t = m.transitions[i];
    if (!in_range(t.from) || !in_range(t.to)) {
      out.push_back(fmt::format("transition {} references missing state ({} -> {})", i, t.from, t.to));
      continue;
    }
    if (!(t.rate > 0.0) || !std::isfinite(t.rate)) {
      out.push_back(fmt::format("transition {} -> {} has non-positive rate {}", t.from, t.to, t.rate));
    }
    ++out_degree[t.from];
  }
  std::set<int> absorbing;
  for (int s : m.absorbing) {
    if (!in_range(s)) {
      out.push_back(fmt::format("absorbing state {} does not exist", s));
      continue;
    }
    absorbing.insert(s);
    if (out_degree[s] > 0) out.push_back(fmt::format("absorbing state {} has outgoing transitions", s));
  }
  for (int s = 0; s < n; ++s) {
    if (out_degree[s] == 0 && !absorbing.count(s)) {
      out.push_back(fmt::format("state {} has no outgoing transition and is not absorbing", s));
    }
  }
  for (const auto& [name, states] : m.labels) {
    for (int s : states) {
      if (!in_range(s)) out.push_back(fmt::format("label {} references missing state {}", name, s));
    }
    if (!std::is_sorted(states.begin(), states.end())) out.push_back("label " + name + " is not sorted");
  }
  for (const auto& [name, values] : m.rewards) {
    if (static_cast<int>(values.size()) != n) {
      out.push_back(fmt::format("reward {} has {} entries for {} states", name, values.size(), n));
    }
    for (std::size_t s = 0; s < values.size(); ++s) {
      if (!(values[s] >= 0.0) || !std::isfinite(values[s])) {
        out.push_back(fmt::format("reward {} is negative or non-finite at state {}", name, s));
        break;
      }
    }
  }
  return out;
}

std::string export_model(const MarkovModel& m) {
  std::string out = std::string(kFormatLine) + "\n";
  out += fmt::format("VARIABLES {}\n", m.variables.size());
  for (const auto& v : m.variables) out += fmt::format("{} {} {}\n", v.name, v.lo, v.hi);
  out += fmt::format("STATES {}\n", m.n_states());
  for (int s = 0; s < m.n_states(); ++s) {
    out += std::to_string(s);
    for (int v : m.valuations[s]) out += " " + std::to_string(v);
    out += "\n";
  }
  out += fmt::format("INIT {}\n", m.initial);
  out += fmt::format("ABSORBING {}\n", m.absorbing.size());
  for (int s : m.absorbing) out += std::to_string(s) + "\n";
  out += fmt::format("TRANSITIONS {}\n", m.transitions.size());
  for (const auto& t : m.transitions) out += fmt::format("{} {} {}\n", t.from, t.to, t.rate);
  out += fmt::format("LABELS {}\n", m.labels.size());
  for (const auto& [name, states] : m.labels) {
    out += fmt::format("{} {}", name, states.size());
    for (int s : states) out += " " + std::to_string(s);
    out += "\n";
  }
  out += fmt::format("REWARDS {}\n", m.rewards.size());
  for (const auto& [name, values] : m.rewards) {
    std::size_t nonzero = 0;
    for (double v : values) nonzero += v != 0.0;
    out += fmt::format("{} {}\n", name, nonzero);
    for (std::size_t s = 0; s < values.size(); ++s) {
      if (values[s] != 0.0) out += fmt::format("{} {}\n", s, values[s]);
    }
  }
  out += "END\n";
  return out;
}

namespace {

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::istringstream next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      return std::istringstream(line);
    }
    fail("unexpected end of file");
  }

  long section(const std::string& keyword) {
    auto ls = next();
    std::string word;
    long count = -1;
    ls >> word >> count;
    if (word != keyword || count < 0) fail(fmt::format("expected '{} <count>'", keyword));
    return count;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ModelError(fmt::format("model file line {}: {}", line_no_, what));
  }

  template <typename T>
  T read(std::istringstream& ls, const char* what) {
    T v{};
    if (!(ls >> v)) fail(std::string("expected ") + what);
    return v;
  }

 private:
  std::istringstream in_;
  int line_no_ = 0;
};

}  // namespace

MarkovModel import_model(const std::string& text) {
  LineReader r(text);
  {
    auto ls = r.next();
    std::string magic;
    std::getline(ls, magic);
    if (magic != kFormatLine) r.fail("unsupported format header '" + magic + "'");
  }
  MarkovModel m;
  const long n_vars = r.section("VARIABLES");
  for (long i = 0; i < n_vars; ++i) {
    auto ls = r.next();
    VariableDecl v;
    v.name = r.read<std::string>(ls, "variable name");
    v.lo = r.read<int>(ls, "lower bound");
    v.hi = r.read<int>(ls, "upper bound");
    m.variables.push_back(v);
  }
  const long n_states = r.section("STATES");
  for (long s = 0; s < n_states; ++s) {
    auto ls = r.next();
    if (r.read<long>(ls, "state index") != s) r.fail("states must be listed in index order");
    std::vector<int> val;
    for (long v = 0; v < n_vars; ++v) val.push_back(r.read<int>(ls, "variable value"));
    m.valuations.push_back(std::move(val));
  }
  {
    auto ls = r.next();
    if (r.read<std::string>(ls, "INIT") != "INIT") r.fail("expected INIT");
    m.initial = r.read<int>(ls, "initial state");
  }
  const long n_abs = r.section("ABSORBING");
  for (long i = 0; i < n_abs; ++i) {
    auto ls = r.next();
    m.absorbing.push_back(r.read<int>(ls, "absorbing state"));
  }
  const long n_trans = r.section("TRANSITIONS");
  for (long i = 0; i < n_trans; ++i) {
    auto ls = r.next();
    Transition t;
    t.from = r.read<int>(ls, "source state");
    t.to = r.read<int>(ls, "target state");
    std::string rate = r.read<std::string>(ls, "rate");
    t.rate = parse_double(rate, "transition rate");
    m.transitions.push_back(t);
  }
  const long n_labels = r.section("LABELS");
  for (long i = 0; i < n_labels; ++i) {
    auto ls = r.next();
    const auto name = r.read<std::string>(ls, "label name");
    const long count = r.read<long>(ls, "label size");
    std::vector<int> states;
    for (long k = 0; k < count; ++k) states.push_back(r.read<int>(ls, "label state"));
    m.labels[name] = std::move(states);
  }
  const long n_rewards = r.section("REWARDS");
  for (long i = 0; i < n_rewards; ++i) {
    auto ls = r.next();
    const auto name = r.read<std::string>(ls, "reward name");
    const long count = r.read<long>(ls, "reward entry count");
    std::vector<double> values(m.valuations.size(), 0.0);
    for (long k = 0; k < count; ++k) {
      auto es = r.next();
      const long s = r.read<long>(es, "reward state");
      const auto v = r.read<std::string>(es, "reward value");
      if (s < 0 || s >= static_cast<long>(values.size())) r.fail("reward state out of range");
      values[s] = parse_double(v, "reward value");
    }
    m.rewards[name] = std::move(values);
  }
  {
    auto ls = r.next();
    if (r.read<std::string>(ls, "END") != "END") r.fail("expected END");
  }
  if (auto problems = validate_model(m); !problems.empty()) {
    throw ModelError("model file describes an invalid model: " + problems.front());
  }
  return m;
}

void save_model(const MarkovModel& model, const std::filesystem::path& path) {
  write_text_file(path, export_model(model));
}

MarkovModel load_model(const std::filesystem::path& path) { return import_model(read_text_file(path)); }

}  // namespace swarmvv
