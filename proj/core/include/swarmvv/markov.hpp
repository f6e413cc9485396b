#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmvv/lfsim.hpp"
#include "swarmvv/pipeline.hpp"

namespace swarmvv {

/// Integer state variable with its declared inclusive range.
struct VariableDecl {
  std::string name;
  int lo = 0;
  int hi = 0;
  friend bool operator==(const VariableDecl&, const VariableDecl&) = default;
};

struct Transition {
  int from = 0;
  int to = 0;
  double rate = 0.0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Explicit labelled CTMC. States listed in `absorbing` carry an implicit
/// rate-1 self-loop and have no other outgoing transitions.
struct MarkovModel {
  std::vector<VariableDecl> variables;
  std::vector<std::vector<int>> valuations;  ///< one value per variable, per state
  std::vector<Transition> transitions;
  int initial = 0;
  std::vector<int> absorbing;
  std::map<std::string, std::vector<int>> labels;      ///< sorted state indices
  std::map<std::string, std::vector<double>> rewards;  ///< dense state rewards

  [[nodiscard]] int n_states() const { return static_cast<int>(valuations.size()); }
  /// Index of a variable, or -1.
  [[nodiscard]] int variable_index(const std::string& name) const;
  [[nodiscard]] int value(int state, const std::string& variable) const;

  friend bool operator==(const MarkovModel&, const MarkovModel&) = default;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BuildMode { PerStateChain, Joint };

/// Value of the `s` variable for each behaviour state: Searching = 1,
/// Pickup = 2, Dropoff = 4 and their avoidance states 0, 3, 5.
int model_state_id(BehaviourState s);
BehaviourState behaviour_from_model_id(int id);

/// Unrolled time-indexed chain: one state per sample joined by unit-rate
/// transitions, closed by an absorbing terminal state. In PerStateChain mode
/// the model tracks `state`'s channel (variables s, l, timestep); in Joint
/// mode it carries the levels of all six channels.
MarkovModel build_model(const DiscreteSeries& series, BuildMode mode,
                        BehaviourState state = BehaviourState::Searching);

/// Checks every structural invariant; an empty result means valid.
std::vector<std::string> validate_model(const MarkovModel& model);

/// Line-oriented text format, versioned by its first line.
std::string export_model(const MarkovModel& model);
MarkovModel import_model(const std::string& text);

void save_model(const MarkovModel& model, const std::filesystem::path& path);
MarkovModel load_model(const std::filesystem::path& path);

}  // namespace swarmvv
