#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "swarmvv/markov.hpp"

namespace swarmvv {

/// Numeric literal or named constant (resolved by bind).
struct Value {
  std::variant<double, std::string> v = 0.0;

  Value() = default;
  Value(double d) : v(d) {}  // NOLINT(google-explicit-constructor)
  Value(std::string name) : v(std::move(name)) {}  // NOLINT(google-explicit-constructor)

  [[nodiscard]] bool is_constant() const { return std::holds_alternative<std::string>(v); }
  [[nodiscard]] double number() const { return std::get<double>(v); }
  [[nodiscard]] const std::string& name() const { return std::get<std::string>(v); }
  friend bool operator==(const Value&, const Value&) = default;
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };
const char* to_string(CmpOp op);

struct StateFormula {
  enum class Kind { True, False, Label, Compare, Not, And, Or };
  Kind kind = Kind::True;
  std::string name;  ///< label or variable
  CmpOp op = CmpOp::Eq;
  Value rhs;
  std::vector<StateFormula> args;  ///< one for Not, two for And/Or

  static StateFormula truth(bool b);
  static StateFormula label(std::string name);
  static StateFormula compare(std::string var, CmpOp op, Value rhs);
  static StateFormula negate(StateFormula f);
  static StateFormula conj(StateFormula a, StateFormula b);
  static StateFormula disj(StateFormula a, StateFormula b);

  friend bool operator==(const StateFormula&, const StateFormula&) = default;
};

struct TimeBound {
  enum class Kind { None, Upper, Interval };
  Kind kind = Kind::None;
  Value lo;  ///< Interval only
  Value hi;  ///< Upper and Interval
  friend bool operator==(const TimeBound&, const TimeBound&) = default;
};

struct PathFormula {
  enum class Kind { Next, Eventually, Globally, Until };
  Kind kind = Kind::Eventually;
  TimeBound bound;
  std::vector<StateFormula> args;  ///< Until: {lhs, rhs}; otherwise one
  friend bool operator==(const PathFormula&, const PathFormula&) = default;
};

enum class ProbBound { Query, Geq, Leq };
enum class RewardForm { Cumulative, Instantaneous, SteadyState };
enum class FilterKind { Count, Sum, Avg, Print };
const char* to_string(FilterKind k);

struct Property {
  enum class Kind { Prob, Reward, Filter, CtlInvariant, CtlReach, State };
  Kind kind = Kind::State;

  ProbBound prob_bound = ProbBound::Query;
  Value threshold;
  PathFormula path;

  std::string structure;
  RewardForm reward_form = RewardForm::Cumulative;
  Value time;

  FilterKind filter = FilterKind::Count;
  std::vector<Property> inner;           ///< Filter: exactly one
  std::vector<StateFormula> restrict_to;  ///< Filter: optional state domain

  StateFormula formula;  ///< CtlInvariant / CtlReach / State

  friend bool operator==(const Property&, const Property&) = default;
};

struct NamedProperty {
  std::string name;  ///< empty when the line has no prefix
  Property property;
  std::string text;  ///< source line without comment
  int line = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, std::vector<std::string> expected, const std::string& message);
  int line;
  int column;
  std::vector<std::string> expected;
};

/// Parses one property (an optional `name:` prefix is rejected here).
Property parse_property(const std::string& text);
/// One property per non-empty line; `//` starts a comment.
std::vector<NamedProperty> parse_property_file(const std::string& text);

/// Canonical text; parse_property(unparse(p)) == p.
std::string unparse(const StateFormula& f);
std::string unparse(const PathFormula& f);
std::string unparse(const Property& p);

/// Named constants referenced anywhere in the property.
std::set<std::string> constants_used(const Property& p);

class BindError : public std::runtime_error {
 public:
  BindError(std::vector<std::string> unresolved, const std::string& message);
  std::vector<std::string> unresolved;
};

/// A property whose constants are all numbers and whose labels, variables
/// and reward structures exist in the model it was bound against.
struct BoundProperty {
  Property property;
  std::vector<std::string> warnings;
};

using Defines = std::vector<std::pair<std::string, double>>;

/// Resolves names against `model` and substitutes `defines`. The label
/// "init" always refers to the initial state.
BoundProperty bind(const Property& p, const MarkovModel& model, const Defines& defines = {});

/// Parses NAME=VALUE.
std::pair<std::string, double> parse_define(const std::string& text);

}  // namespace swarmvv
