#include "swarmvv/propspec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <fmt/core.h>

namespace swarmvv {

const char* to_string(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

const char* to_string(FilterKind k) {
  switch (k) {
    case FilterKind::Count: return "count";
    case FilterKind::Sum: return "sum";
    case FilterKind::Avg: return "avg";
    case FilterKind::Print: return "print";
  }
  return "?";
}

StateFormula StateFormula::truth(bool b) {
  StateFormula f;
  f.kind = b ? Kind::True : Kind::False;
  return f;
}

StateFormula StateFormula::label(std::string name) {
  StateFormula f;
  f.kind = Kind::Label;
  f.name = std::move(name);
  return f;
}

StateFormula StateFormula::compare(std::string var, CmpOp op, Value rhs) {
  StateFormula f;
  f.kind = Kind::Compare;
  f.name = std::move(var);
  f.op = op;
  f.rhs = std::move(rhs);
  return f;
}

StateFormula StateFormula::negate(StateFormula a) {
  StateFormula f;
  f.kind = Kind::Not;
  f.args.push_back(std::move(a));
  return f;
}

StateFormula StateFormula::conj(StateFormula a, StateFormula b) {
  StateFormula f;
  f.kind = Kind::And;
  f.args.push_back(std::move(a));
  f.args.push_back(std::move(b));
  return f;
}

StateFormula StateFormula::disj(StateFormula a, StateFormula b) {
  StateFormula f;
  f.kind = Kind::Or;
  f.args.push_back(std::move(a));
  f.args.push_back(std::move(b));
  return f;
}

ParseError::ParseError(int line_, int column_, std::vector<std::string> expected_, const std::string& message)
    : std::runtime_error(message), line(line_), column(column_), expected(std::move(expected_)) {}

BindError::BindError(std::vector<std::string> unresolved_, const std::string& message)
    : std::runtime_error(message), unresolved(std::move(unresolved_)) {}

namespace {

enum class Tok { Ident, Number, String, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  int line = 1;
  int column = 1;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "\"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

std::vector<Token> lex(const std::string& text, int first_line) {
  std::vector<Token> out;
  int line = first_line;
  int col = 1;
  std::size_t i = 0;
  auto error = [&](const std::string& what) {
    throw ParseError(line, col, {}, fmt::format("line {}, column {}: {}", line, col, what));
  };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++col;
      continue;
    }
    if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
      t.kind = Tok::Ident;
      t.text = text.substr(start, i - start);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < text.size() &&
                                                                std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
          i = j;
          while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
        }
      }
      t.kind = Tok::Number;
      t.text = text.substr(start, i - start);
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) error("malformed number " + t.text);
    } else if (c == '"') {
      ++i;
      while (i < text.size() && text[i] != '"' && text[i] != '\n') ++i;
      if (i >= text.size() || text[i] != '"') error("unterminated string");
      t.kind = Tok::String;
      t.text = text.substr(start + 1, i - start - 1);
      ++i;
    } else {
      static const char* two[] = {"<=", ">=", "!="};
      t.kind = Tok::Sym;
      for (const char* s : two) {
        if (text.compare(i, 2, s) == 0) t.text = s;
      }
      if (t.text.empty()) {
        if (std::string("()[]{},:=<>!&|?-").find(c) == std::string::npos) {
          error(fmt::format("unexpected character '{}'", c));
        }
        t.text = std::string(1, c);
      }
      i += t.text.size();
    }
    col += static_cast<int>(i - start);
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

const std::set<std::string>& reserved() {
  static const std::set<std::string> words{"P", "R", "A", "E", "F", "G", "X", "U", "C",
                                           "I", "S", "filter", "true", "false"};
  return words;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  NamedProperty named() {
    NamedProperty out;
    if ((peek().kind == Tok::Ident || peek().kind == Tok::String) && peek(1).kind == Tok::Sym &&
        peek(1).text == ":") {
      out.name = peek().text;
      pos_ += 2;
    }
    out.property = property();
    expect_end();
    return out;
  }

  Property whole() {
    Property p = property();
    expect_end();
    return p;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool is_sym(const char* s, std::size_t k = 0) const { return peek(k).kind == Tok::Sym && peek(k).text == s; }
  bool is_word(const char* s, std::size_t k = 0) const { return peek(k).kind == Tok::Ident && peek(k).text == s; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    std::string list;
    for (std::size_t i = 0; i < expected.size(); ++i) list += (i ? ", " : "") + expected[i];
    throw ParseError(t.line, t.column, expected,
                     fmt::format("line {}, column {}: expected {} but found {}", t.line, t.column, list, describe(t)));
  }

  void expect_sym(const char* s) {
    if (!is_sym(s)) fail({fmt::format("'{}'", s)});
    ++pos_;
  }
  void expect_word(const char* s) {
    if (!is_word(s)) fail({fmt::format("'{}'", s)});
    ++pos_;
  }
  void expect_end() const {
    if (peek().kind != Tok::End) fail({"end of property"});
  }

  Property property() {
    Property p;
    if (is_word("P")) {
      ++pos_;
      p.kind = Property::Kind::Prob;
      if (is_sym("=")) {
        ++pos_;
        expect_sym("?");
        p.prob_bound = ProbBound::Query;
      } else if (is_sym(">=") || is_sym("<=")) {
        p.prob_bound = is_sym(">=") ? ProbBound::Geq : ProbBound::Leq;
        ++pos_;
        p.threshold = value();
      } else {
        fail({"'=?'", "'>='", "'<='"});
      }
      expect_sym("[");
      p.path = path();
      expect_sym("]");
    } else if (is_word("R")) {
      ++pos_;
      p.kind = Property::Kind::Reward;
      expect_sym("{");
      if (peek().kind != Tok::String) fail({"quoted reward structure name"});
      p.structure = peek().text;
      ++pos_;
      expect_sym("}");
      expect_sym("=");
      expect_sym("?");
      expect_sym("[");
      if (is_word("C")) {
        ++pos_;
        expect_sym("<=");
        p.reward_form = RewardForm::Cumulative;
        p.time = value();
      } else if (is_word("I")) {
        ++pos_;
        expect_sym("=");
        p.reward_form = RewardForm::Instantaneous;
        p.time = value();
      } else if (is_word("S")) {
        ++pos_;
        p.reward_form = RewardForm::SteadyState;
      } else {
        fail({"'C'", "'I'", "'S'"});
      }
      expect_sym("]");
    } else if (is_word("filter")) {
      ++pos_;
      p.kind = Property::Kind::Filter;
      expect_sym("(");
      if (peek().kind != Tok::Ident) fail({"filter kind (count, sum, avg, print)"});
      const std::string kind = peek().text;
      if (kind == "count") {
        p.filter = FilterKind::Count;
      } else if (kind == "sum") {
        p.filter = FilterKind::Sum;
      } else if (kind == "avg") {
        p.filter = FilterKind::Avg;
      } else if (kind == "print") {
        p.filter = FilterKind::Print;
      } else {
        const Token& t = peek();
        throw ParseError(t.line, t.column, {"count", "sum", "avg", "print"},
                         fmt::format("line {}, column {}: unknown filter kind '{}' (expected count, sum, avg or print)",
                                     t.line, t.column, kind));
      }
      ++pos_;
      expect_sym(",");
      p.inner.push_back(property());
      if (p.inner.front().kind == Property::Kind::Filter) {
        const Token& t = peek();
        throw ParseError(t.line, t.column, {}, fmt::format("line {}: filters cannot be nested", t.line));
      }
      if (is_sym(",")) {
        ++pos_;
        p.restrict_to.push_back(state());
      }
      expect_sym(")");
    } else if (is_word("A") && is_sym("[", 1)) {
      pos_ += 2;
      p.kind = Property::Kind::CtlInvariant;
      expect_word("G");
      p.formula = state();
      expect_sym("]");
    } else if (is_word("E") && is_sym("[", 1)) {
      pos_ += 2;
      p.kind = Property::Kind::CtlReach;
      expect_word("F");
      p.formula = state();
      expect_sym("]");
    } else {
      p.kind = Property::Kind::State;
      p.formula = state();
    }
    return p;
  }

  TimeBound bound() {
    TimeBound b;
    if (is_sym("<=") || is_sym("<")) {
      ++pos_;
      b.kind = TimeBound::Kind::Upper;
      b.hi = value();
    } else if (is_sym("[")) {
      ++pos_;
      b.kind = TimeBound::Kind::Interval;
      b.lo = value();
      expect_sym(",");
      b.hi = value();
      expect_sym("]");
    }
    return b;
  }

  PathFormula path() {
    PathFormula f;
    if (is_word("X")) {
      ++pos_;
      f.kind = PathFormula::Kind::Next;
      f.args.push_back(state());
    } else if (is_word("F") || is_word("G")) {
      f.kind = is_word("F") ? PathFormula::Kind::Eventually : PathFormula::Kind::Globally;
      ++pos_;
      f.bound = bound();
      f.args.push_back(state());
    } else {
      f.kind = PathFormula::Kind::Until;
      f.args.push_back(state());
      if (!is_word("U")) fail({"'U'"});
      ++pos_;
      f.bound = bound();
      f.args.push_back(state());
    }
    return f;
  }

  Value value() {
    bool negative = false;
    if (is_sym("-")) {
      negative = true;
      ++pos_;
    }
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      ++pos_;
      return negative ? -t.number : t.number;
    }
    if (!negative && t.kind == Tok::Ident && !reserved().count(t.text)) {
      ++pos_;
      return t.text;
    }
    fail({"number", "constant name"});
  }

  StateFormula state() {
    StateFormula f = conjunction();
    while (is_sym("|")) {
      ++pos_;
      f = StateFormula::disj(std::move(f), conjunction());
    }
    return f;
  }

  StateFormula conjunction() {
    StateFormula f = unary();
    while (is_sym("&")) {
      ++pos_;
      f = StateFormula::conj(std::move(f), unary());
    }
    return f;
  }

  StateFormula unary() {
    if (is_sym("!")) {
      ++pos_;
      return StateFormula::negate(unary());
    }
    return atom();
  }

  StateFormula atom() {
    const Token& t = peek();
    if (t.kind == Tok::String) {
      ++pos_;
      return StateFormula::label(t.text);
    }
    if (is_sym("(")) {
      ++pos_;
      StateFormula f = state();
      expect_sym(")");
      return f;
    }
    if (is_word("true") || is_word("false")) {
      ++pos_;
      return StateFormula::truth(t.text == "true");
    }
    if (t.kind == Tok::Ident && !reserved().count(t.text)) {
      std::string var = t.text;
      ++pos_;
      CmpOp op{};
      if (is_sym("=")) {
        op = CmpOp::Eq;
      } else if (is_sym("!=")) {
        op = CmpOp::Ne;
      } else if (is_sym("<")) {
        op = CmpOp::Lt;
      } else if (is_sym("<=")) {
        op = CmpOp::Le;
      } else if (is_sym(">")) {
        op = CmpOp::Gt;
      } else if (is_sym(">=")) {
        op = CmpOp::Ge;
      } else {
        fail({"'='", "'!='", "'<'", "'<='", "'>'", "'>='"});
      }
      ++pos_;
      return StateFormula::compare(std::move(var), op, value());
    }
    fail({"quoted label", "'('", "'!'", "'true'", "'false'", "variable comparison"});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string unparse_value(const Value& v) {
  if (v.is_constant()) return v.name();
  return fmt::format("{}", v.number());
}

std::string unparse_bound(const TimeBound& b) {
  switch (b.kind) {
    case TimeBound::Kind::None: return "";
    case TimeBound::Kind::Upper: return "<=" + unparse_value(b.hi);
    case TimeBound::Kind::Interval: return "[" + unparse_value(b.lo) + "," + unparse_value(b.hi) + "]";
  }
  return "";
}

void collect(const Value& v, std::set<std::string>& out) {
  if (v.is_constant()) out.insert(v.name());
}

void collect(const StateFormula& f, std::set<std::string>& out) {
  if (f.kind == StateFormula::Kind::Compare) collect(f.rhs, out);
  for (const auto& a : f.args) collect(a, out);
}

void collect(const Property& p, std::set<std::string>& out) {
  switch (p.kind) {
    case Property::Kind::Prob:
      if (p.prob_bound != ProbBound::Query) collect(p.threshold, out);
      if (p.path.bound.kind == TimeBound::Kind::Interval) collect(p.path.bound.lo, out);
      if (p.path.bound.kind != TimeBound::Kind::None) collect(p.path.bound.hi, out);
      for (const auto& a : p.path.args) collect(a, out);
      break;
    case Property::Kind::Reward:
      if (p.reward_form != RewardForm::SteadyState) collect(p.time, out);
      break;
    case Property::Kind::Filter:
      for (const auto& i : p.inner) collect(i, out);
      for (const auto& r : p.restrict_to) collect(r, out);
      break;
    default:
      collect(p.formula, out);
  }
}

class Binder {
 public:
  Binder(const MarkovModel& m, const Defines& d) : model_(m), defines_(d) {}

  BoundProperty run(const Property& p) {
    BoundProperty out;
    out.property = p;
    property(out.property);
    if (!unresolved_.empty()) {
      std::string list;
      for (const auto& u : unresolved_) list += (list.empty() ? "" : ", ") + u;
      throw BindError(unresolved_, "unresolved names: " + list);
    }
    if (!invalid_.empty()) throw BindError({}, invalid_.front());
    out.warnings = std::move(warnings_);
    return out;
  }

 private:
  void miss(const std::string& what) {
    if (std::find(unresolved_.begin(), unresolved_.end(), what) == unresolved_.end()) unresolved_.push_back(what);
  }

  void resolve(Value& v) {
    if (!v.is_constant()) return;
    const std::string name = v.name();
    for (auto it = defines_.rbegin(); it != defines_.rend(); ++it) {
      if (it->first == name) {
        v = it->second;
        return;
      }
    }
    miss("constant " + name);
  }

  void time(Value& v) {
    resolve(v);
    if (!v.is_constant() && !(v.number() >= 0.0)) invalid_.push_back(fmt::format("time bound {} is negative", v.number()));
  }

  void state(StateFormula& f) {
    using K = StateFormula::Kind;
    if (f.kind == K::Label) {
      if (f.name != "init" && !model_.labels.count(f.name)) miss("label \"" + f.name + "\"");
    } else if (f.kind == K::Compare) {
      resolve(f.rhs);
      const int idx = model_.variable_index(f.name);
      if (idx < 0) {
        miss("variable " + f.name);
      } else if (!f.rhs.is_constant()) {
        const auto& decl = model_.variables[idx];
        const double c = f.rhs.number();
        if (c < decl.lo || c > decl.hi) {
          warnings_.push_back(fmt::format("{}{}{} compares against a value outside {}'s range {}..{}; the comparison "
                                          "is constant",
                                          f.name, to_string(f.op), unparse_value(f.rhs), f.name, decl.lo, decl.hi));
        }
      }
    }
    for (auto& a : f.args) state(a);
  }

  void property(Property& p) {
    switch (p.kind) {
      case Property::Kind::Prob: {
        if (p.prob_bound != ProbBound::Query) {
          resolve(p.threshold);
          if (!p.threshold.is_constant() && !(p.threshold.number() >= 0.0 && p.threshold.number() <= 1.0)) {
            invalid_.push_back(fmt::format("probability bound {} is outside [0,1]", p.threshold.number()));
          }
        }
        auto& b = p.path.bound;
        if (b.kind == TimeBound::Kind::Interval) time(b.lo);
        if (b.kind != TimeBound::Kind::None) time(b.hi);
        if (b.kind == TimeBound::Kind::Interval && !b.lo.is_constant() && !b.hi.is_constant() &&
            b.lo.number() > b.hi.number()) {
          invalid_.push_back(fmt::format("interval [{},{}] has lower bound above upper bound", b.lo.number(),
                                         b.hi.number()));
        }
        if (p.path.kind == PathFormula::Kind::Next && b.kind != TimeBound::Kind::None) {
          invalid_.push_back("X takes no time bound");
        }
        for (auto& a : p.path.args) state(a);
        break;
      }
      case Property::Kind::Reward:
        if (!model_.rewards.count(p.structure)) miss("reward structure \"" + p.structure + "\"");
        if (p.reward_form != RewardForm::SteadyState) time(p.time);
        break;
      case Property::Kind::Filter:
        for (auto& i : p.inner) property(i);
        for (auto& r : p.restrict_to) state(r);
        break;
      default:
        state(p.formula);
    }
  }

  const MarkovModel& model_;
  const Defines& defines_;
  std::vector<std::string> unresolved_;
  std::vector<std::string> invalid_;
  std::vector<std::string> warnings_;
};

}  // namespace

Property parse_property(const std::string& text) { return Parser(lex(text, 1)).whole(); }

std::vector<NamedProperty> parse_property_file(const std::string& text) {
  std::vector<NamedProperty> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (const auto c = line.find("//"); c != std::string::npos) line.erase(c);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    NamedProperty np = Parser(lex(line, line_no)).named();
    np.text = line.substr(first);
    np.line = line_no;
    out.push_back(std::move(np));
    if (end == text.size()) break;
  }
  return out;
}

std::string unparse(const StateFormula& f) {
  using K = StateFormula::Kind;
  switch (f.kind) {
    case K::True: return "true";
    case K::False: return "false";
    case K::Label: return "\"" + f.name + "\"";
    case K::Compare: return f.name + to_string(f.op) + unparse_value(f.rhs);
    case K::Not: return "!" + unparse(f.args[0]);
    case K::And: return "(" + unparse(f.args[0]) + " & " + unparse(f.args[1]) + ")";
    case K::Or: return "(" + unparse(f.args[0]) + " | " + unparse(f.args[1]) + ")";
  }
  return "";
}

std::string unparse(const PathFormula& f) {
  switch (f.kind) {
    case PathFormula::Kind::Next: return "X " + unparse(f.args[0]);
    case PathFormula::Kind::Eventually: return "F" + unparse_bound(f.bound) + " " + unparse(f.args[0]);
    case PathFormula::Kind::Globally: return "G" + unparse_bound(f.bound) + " " + unparse(f.args[0]);
    case PathFormula::Kind::Until:
      return unparse(f.args[0]) + " U" + unparse_bound(f.bound) + " " + unparse(f.args[1]);
  }
  return "";
}

std::string unparse(const Property& p) {
  switch (p.kind) {
    case Property::Kind::Prob: {
      std::string head = "P=?";
      if (p.prob_bound == ProbBound::Geq) head = "P>=" + unparse_value(p.threshold);
      if (p.prob_bound == ProbBound::Leq) head = "P<=" + unparse_value(p.threshold);
      return head + " [ " + unparse(p.path) + " ]";
    }
    case Property::Kind::Reward: {
      std::string form = "S";
      if (p.reward_form == RewardForm::Cumulative) form = "C<=" + unparse_value(p.time);
      if (p.reward_form == RewardForm::Instantaneous) form = "I=" + unparse_value(p.time);
      return "R{\"" + p.structure + "\"}=? [ " + form + " ]";
    }
    case Property::Kind::Filter: {
      std::string out = std::string("filter(") + to_string(p.filter) + ", " + unparse(p.inner.at(0));
      if (!p.restrict_to.empty()) out += ", " + unparse(p.restrict_to[0]);
      return out + ")";
    }
    case Property::Kind::CtlInvariant: return "A [ G " + unparse(p.formula) + " ]";
    case Property::Kind::CtlReach: return "E [ F " + unparse(p.formula) + " ]";
    case Property::Kind::State: return unparse(p.formula);
  }
  return "";
}

std::set<std::string> constants_used(const Property& p) {
  std::set<std::string> out;
  collect(p, out);
  return out;
}

BoundProperty bind(const Property& p, const MarkovModel& model, const Defines& defines) {
  return Binder(model, defines).run(p);
}

std::pair<std::string, double> parse_define(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("define '" + text + "' is not NAME=VALUE");
  const std::string name = text.substr(0, eq);
  const bool ident = (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_') &&
                     std::all_of(name.begin(), name.end(),
                                 [](unsigned char c) { return std::isalnum(c) || c == '_'; });
  if (!ident) throw std::invalid_argument("define '" + text + "' does not name an identifier");
  const std::string rest = text.substr(eq + 1);
  double v = 0.0;
  const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), v);
  if (rest.empty() || res.ec != std::errc() || res.ptr != rest.data() + rest.size() || !std::isfinite(v)) {
    throw std::invalid_argument("define '" + text + "' has a non-numeric value");
  }
  return {name, v};
}

}  // namespace swarmvv
