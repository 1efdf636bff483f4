#include "privflow/constraints.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "privflow/error.hpp"

namespace privflow {

std::string_view to_string(VarType type) {
  switch (type) {
    case VarType::int_: return "int";
    case VarType::string: return "string";
    case VarType::bool_: return "bool";
  }
  return "int";
}

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::eq: return "==";
    case CmpOp::ne: return "!=";
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
  }
  return "==";
}

CmpOp negate(CmpOp op) {
  switch (op) {
    case CmpOp::eq: return CmpOp::ne;
    case CmpOp::ne: return CmpOp::eq;
    case CmpOp::lt: return CmpOp::ge;
    case CmpOp::le: return CmpOp::gt;
    case CmpOp::gt: return CmpOp::le;
    case CmpOp::ge: return CmpOp::lt;
  }
  return op;
}

namespace {

CmpOp mirror(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return CmpOp::gt;
    case CmpOp::le: return CmpOp::ge;
    case CmpOp::gt: return CmpOp::lt;
    case CmpOp::ge: return CmpOp::le;
    default: return op;
  }
}

}  // namespace

Formula Formula::truth(bool value) {
  Formula f;
  f.kind = value ? Kind::true_ : Kind::false_;
  return f;
}

Formula Formula::boolean(std::string var) {
  Formula f;
  f.kind = Kind::bool_var;
  f.var = std::move(var);
  return f;
}

Formula Formula::compare(Term lhs, CmpOp op, Term rhs) {
  Formula f;
  f.kind = Kind::cmp;
  f.op = op;
  f.lhs = std::move(lhs);
  f.rhs = std::move(rhs);
  return f;
}

Formula Formula::conj(std::vector<Formula> children) {
  if (children.empty()) return truth(true);
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind = Kind::and_;
  f.children = std::move(children);
  return f;
}

Formula Formula::disj(std::vector<Formula> children) {
  if (children.empty()) return truth(false);
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind = Kind::or_;
  f.children = std::move(children);
  return f;
}

Formula Formula::negation(Formula child) {
  Formula f;
  f.kind = Kind::not_;
  f.children.push_back(std::move(child));
  return f;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

using TypeMap = std::map<std::string, VarType, std::less<>>;

TypeMap declared_types(const PathConstraint& c) {
  TypeMap types;
  for (const auto& v : c.variables) {
    if (v.name.empty()) throw ConstraintError("variable with empty name");
    if (!types.emplace(v.name, v.type).second) throw ConstraintError("variable declared twice: " + v.name);
  }
  return types;
}

VarType var_type(const TypeMap& types, const std::string& name) {
  auto it = types.find(name);
  if (it == types.end()) throw ConstraintError("undeclared variable: " + name);
  return it->second;
}

void validate_formula(const Formula& f, const TypeMap& types) {
  switch (f.kind) {
    case Formula::Kind::true_:
    case Formula::Kind::false_: return;
    case Formula::Kind::bool_var:
      if (var_type(types, f.var) != VarType::bool_) throw ConstraintError("not a bool variable: " + f.var);
      return;
    case Formula::Kind::not_:
      if (f.children.size() != 1) throw ConstraintError("negation takes one operand");
      validate_formula(f.children[0], types);
      return;
    case Formula::Kind::and_:
    case Formula::Kind::or_:
      for (const auto& c : f.children) validate_formula(c, types);
      return;
    case Formula::Kind::cmp: break;
  }
  const Term* var = &f.lhs;
  const Term* other = &f.rhs;
  if (var->kind != Term::Kind::var) std::swap(var, other);
  if (var->kind != Term::Kind::var) throw ConstraintError("comparison between two constants");
  VarType t = var_type(types, var->name);
  bool equality = f.op == CmpOp::eq || f.op == CmpOp::ne;
  switch (other->kind) {
    case Term::Kind::int_lit:
      if (t != VarType::int_) throw ConstraintError("int constant compared with " + var->name);
      return;
    case Term::Kind::str_lit:
      if (t != VarType::string) throw ConstraintError("string constant compared with " + var->name);
      if (!equality) throw ConstraintError("ordering on strings");
      return;
    case Term::Kind::var:
      if (var_type(types, other->name) != t) throw ConstraintError("type mismatch: " + var->name + ", " + other->name);
      if (!equality || t == VarType::bool_) throw ConstraintError("variable comparison outside the fragment");
      return;
  }
}

}  // namespace

void validate(const PathConstraint& c) { validate_formula(c.formula, declared_types(c)); }

// ---------------------------------------------------------------------------
// Evaluation

namespace {

const Value& value_of(const Assignment& a, const std::string& name) {
  auto it = a.find(name);
  if (it == a.end()) throw MissingVariable(name);
  return it->second;
}

template <typename T>
bool compare_values(const T& a, CmpOp op, const T& b) {
  switch (op) {
    case CmpOp::eq: return a == b;
    case CmpOp::ne: return a != b;
    case CmpOp::lt: return a < b;
    case CmpOp::le: return a <= b;
    case CmpOp::gt: return a > b;
    case CmpOp::ge: return a >= b;
  }
  return false;
}

Value term_value(const Term& t, const Assignment& a) {
  switch (t.kind) {
    case Term::Kind::var: return value_of(a, t.name);
    case Term::Kind::int_lit: return t.int_value;
    case Term::Kind::str_lit: return t.str_value;
  }
  return std::int64_t{0};
}

bool eval(const Formula& f, const Assignment& a) {
  switch (f.kind) {
    case Formula::Kind::true_: return true;
    case Formula::Kind::false_: return false;
    case Formula::Kind::bool_var: {
      const Value& v = value_of(a, f.var);
      if (!std::holds_alternative<bool>(v)) throw ConstraintError("non-bool value for " + f.var);
      return std::get<bool>(v);
    }
    case Formula::Kind::not_: return !eval(f.children[0], a);
    case Formula::Kind::and_:
      for (const auto& c : f.children) {
        if (!eval(c, a)) return false;
      }
      return true;
    case Formula::Kind::or_:
      for (const auto& c : f.children) {
        if (eval(c, a)) return true;
      }
      return false;
    case Formula::Kind::cmp: break;
  }
  Value l = term_value(f.lhs, a);
  Value r = term_value(f.rhs, a);
  if (l.index() != r.index()) throw ConstraintError("type mismatch in comparison");
  if (const auto* li = std::get_if<std::int64_t>(&l)) return compare_values(*li, f.op, std::get<std::int64_t>(r));
  if (const auto* ls = std::get_if<std::string>(&l)) return compare_values(*ls, f.op, std::get<std::string>(r));
  return compare_values(std::get<bool>(l), f.op, std::get<bool>(r));
}

}  // namespace

bool eval_witness(const PathConstraint& c, const Assignment& assignment) {
  for (const auto& v : c.variables) {
    const Value& val = value_of(assignment, v.name);
    bool ok = (v.type == VarType::int_ && std::holds_alternative<std::int64_t>(val)) ||
              (v.type == VarType::string && std::holds_alternative<std::string>(val)) ||
              (v.type == VarType::bool_ && std::holds_alternative<bool>(val));
    if (!ok) throw ConstraintError("value of wrong type for " + v.name);
  }
  return eval(c.formula, assignment);
}

// ---------------------------------------------------------------------------
// Decision procedure

namespace {

Formula to_nnf(const Formula& f, bool negated) {
  switch (f.kind) {
    case Formula::Kind::true_:
    case Formula::Kind::false_: return Formula::truth((f.kind == Formula::Kind::true_) != negated);
    case Formula::Kind::bool_var: return negated ? Formula::negation(f) : f;
    case Formula::Kind::cmp: {
      Formula out = f;
      if (negated) out.op = negate(f.op);
      return out;
    }
    case Formula::Kind::not_: return to_nnf(f.children[0], !negated);
    case Formula::Kind::and_:
    case Formula::Kind::or_: {
      Formula out;
      bool is_and = (f.kind == Formula::Kind::and_) != negated;
      out.kind = is_and ? Formula::Kind::and_ : Formula::Kind::or_;
      for (const auto& c : f.children) out.children.push_back(to_nnf(c, negated));
      return out;
    }
  }
  return f;
}

using Cube = std::vector<const Formula*>;

struct CubeOverflow {};

// Literals of an NNF formula in disjunctive normal form. An empty result means
// false; a single empty cube means true.
std::vector<Cube> to_dnf(const Formula& f, std::size_t cap) {
  switch (f.kind) {
    case Formula::Kind::true_: return {Cube{}};
    case Formula::Kind::false_: return {};
    case Formula::Kind::bool_var:
    case Formula::Kind::cmp:
    case Formula::Kind::not_: return {Cube{&f}};
    case Formula::Kind::or_: {
      std::vector<Cube> out;
      for (const auto& c : f.children) {
        auto part = to_dnf(c, cap);
        if (out.size() + part.size() > cap) throw CubeOverflow{};
        out.insert(out.end(), part.begin(), part.end());
      }
      return out;
    }
    case Formula::Kind::and_: {
      std::vector<Cube> out{Cube{}};
      for (const auto& c : f.children) {
        auto part = to_dnf(c, cap);
        if (part.empty()) return {};
        if (out.size() * part.size() > cap) throw CubeOverflow{};
        std::vector<Cube> next;
        next.reserve(out.size() * part.size());
        for (const auto& a : out) {
          for (const auto& b : part) {
            Cube merged = a;
            merged.insert(merged.end(), b.begin(), b.end());
            next.push_back(std::move(merged));
          }
        }
        out = std::move(next);
      }
      return out;
    }
  }
  return {};
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

struct IntClass {
  std::int64_t lo = kMin;  // kMin/kMax mean unbounded
  std::int64_t hi = kMax;
  std::set<std::int64_t> excluded;
  std::set<std::size_t> neighbours;  // classes that must differ
  bool bounded() const { return lo != kMin && hi != kMax; }
};

enum class CubeResult { sat, unsat, unknown };

class CubeSolver {
 public:
  CubeSolver(const PathConstraint& c, const Cube& cube, const SatLimits& limits) : c_(c), cube_(cube), limits_(limits) {
    for (std::size_t i = 0; i < c.variables.size(); ++i) index_[c.variables[i].name] = i;
    collect_literals(c.formula);
  }

  CubeResult solve(Assignment& witness) {
    if (!solve_bools(witness)) return CubeResult::unsat;
    if (!solve_strings(witness)) return CubeResult::unsat;
    return solve_ints(witness);
  }

 private:
  std::size_t idx(const std::string& name) const { return index_.at(name); }
  VarType type_of(const std::string& name) const { return c_.variables[idx(name)].type; }

  void collect_literals(const Formula& f) {
    if (f.kind == Formula::Kind::cmp) {
      for (const Term* t : {&f.lhs, &f.rhs}) {
        if (t->kind == Term::Kind::str_lit) string_literals_.insert(t->str_value);
      }
    }
    for (const auto& ch : f.children) collect_literals(ch);
  }

  bool solve_bools(Assignment& witness) {
    std::map<std::string, bool> forced;
    for (const Formula* lit : cube_) {
      bool positive = lit->kind == Formula::Kind::bool_var;
      const Formula* atom = positive ? lit : (lit->kind == Formula::Kind::not_ ? &lit->children[0] : nullptr);
      if (atom == nullptr || atom->kind != Formula::Kind::bool_var) continue;
      auto [it, fresh] = forced.emplace(atom->var, positive);
      if (!fresh && it->second != positive) return false;
    }
    for (const auto& v : c_.variables) {
      if (v.type != VarType::bool_) continue;
      auto it = forced.find(v.name);
      witness[v.name] = it == forced.end() ? false : it->second;
    }
    return true;
  }

  // Comparison with the variable on the left when there is one.
  static Formula oriented(const Formula& f) {
    if (f.lhs.kind != Term::Kind::var && f.rhs.kind == Term::Kind::var) {
      return Formula::compare(f.rhs, mirror(f.op), f.lhs);
    }
    return f;
  }

  std::vector<Formula> comparisons(VarType type) const {
    std::vector<Formula> out;
    for (const Formula* lit : cube_) {
      if (lit->kind != Formula::Kind::cmp) continue;
      Formula f = oriented(*lit);
      if (f.lhs.kind == Term::Kind::var && type_of(f.lhs.name) == type) out.push_back(std::move(f));
    }
    return out;
  }

  bool solve_strings(Assignment& witness) {
    const std::size_t n = c_.variables.size();
    UnionFind uf(n);
    auto atoms = comparisons(VarType::string);
    for (const auto& f : atoms) {
      if (f.op == CmpOp::eq && f.rhs.kind == Term::Kind::var) uf.unite(idx(f.lhs.name), idx(f.rhs.name));
    }
    std::map<std::size_t, std::string> pinned;
    for (const auto& f : atoms) {
      if (f.op != CmpOp::eq || f.rhs.kind != Term::Kind::str_lit) continue;
      auto [it, fresh] = pinned.emplace(uf.find(idx(f.lhs.name)), f.rhs.str_value);
      if (!fresh && it->second != f.rhs.str_value) return false;
    }
    for (const auto& f : atoms) {
      if (f.op != CmpOp::ne) continue;
      std::size_t a = uf.find(idx(f.lhs.name));
      if (f.rhs.kind == Term::Kind::var) {
        if (a == uf.find(idx(f.rhs.name))) return false;
      } else {
        auto it = pinned.find(a);
        if (it != pinned.end() && it->second == f.rhs.str_value) return false;
      }
    }
    // Unpinned classes get distinct values that no literal uses, which
    // satisfies every remaining disequality.
    std::map<std::size_t, std::string> fresh_values;
    std::size_t counter = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (c_.variables[i].type != VarType::string) continue;
      std::size_t root = uf.find(i);
      if (auto it = pinned.find(root); it != pinned.end()) {
        witness[c_.variables[i].name] = it->second;
        continue;
      }
      auto it = fresh_values.find(root);
      if (it == fresh_values.end()) {
        std::string v;
        do {
          v = "fresh" + std::to_string(counter++);
        } while (string_literals_.contains(v));
        it = fresh_values.emplace(root, v).first;
      }
      witness[c_.variables[i].name] = it->second;
    }
    return true;
  }

  static bool tighten(IntClass& k, CmpOp op, std::int64_t v) {
    switch (op) {
      case CmpOp::eq:
        k.lo = std::max(k.lo, v);
        k.hi = std::min(k.hi, v);
        return true;
      case CmpOp::ne: k.excluded.insert(v); return true;
      case CmpOp::lt:
        if (v == kMin) return false;
        k.hi = std::min(k.hi, v - 1);
        return true;
      case CmpOp::le: k.hi = std::min(k.hi, v); return true;
      case CmpOp::gt:
        if (v == kMax) return false;
        k.lo = std::max(k.lo, v + 1);
        return true;
      case CmpOp::ge: k.lo = std::max(k.lo, v); return true;
    }
    return true;
  }

  // Values of the class in ascending distance from its preferred end; at most
  // `limit` of them.
  static std::vector<std::int64_t> candidates(const IntClass& k, std::size_t limit) {
    std::vector<std::int64_t> out;
    auto push = [&](std::int64_t v) {
      if (v >= k.lo && v <= k.hi && !k.excluded.contains(v)) out.push_back(v);
    };
    if (k.lo != kMin) {
      for (std::int64_t v = k.lo; out.size() < limit; ++v) {
        push(v);
        if (v == k.hi) break;
      }
    } else if (k.hi != kMax) {
      for (std::int64_t v = k.hi; out.size() < limit; --v) push(v);
    } else {
      push(0);
      for (std::int64_t d = 1; out.size() < limit; ++d) {
        push(d);
        push(-d);
      }
      out.resize(std::min(out.size(), limit));
    }
    return out;
  }

  // Number of admissible values, saturated at `cap`.
  static std::size_t available(const IntClass& k, std::size_t cap) {
    if (!k.bounded()) return cap;
    // hi - lo cannot overflow in unsigned 64-bit arithmetic; +1 can.
    std::uint64_t span = static_cast<std::uint64_t>(k.hi) - static_cast<std::uint64_t>(k.lo);
    std::size_t inside = 0;
    for (auto v : k.excluded) inside += (v >= k.lo && v <= k.hi) ? 1 : 0;
    if (span == std::numeric_limits<std::uint64_t>::max()) return cap;
    std::uint64_t count = span + 1 - inside;
    return count > cap ? cap : static_cast<std::size_t>(count);
  }

  CubeResult solve_ints(Assignment& witness) {
    const std::size_t n = c_.variables.size();
    UnionFind uf(n);
    auto atoms = comparisons(VarType::int_);
    for (const auto& f : atoms) {
      if (f.rhs.kind != Term::Kind::var) continue;
      if (f.op == CmpOp::eq) {
        uf.unite(idx(f.lhs.name), idx(f.rhs.name));
      } else if (f.op != CmpOp::ne) {
        return CubeResult::unknown;  // var-var ordering is outside the fragment
      }
    }
    std::map<std::size_t, IntClass> classes;
    for (std::size_t i = 0; i < n; ++i) {
      if (c_.variables[i].type == VarType::int_) classes[uf.find(i)];
    }
    for (const auto& f : atoms) {
      std::size_t a = uf.find(idx(f.lhs.name));
      if (f.rhs.kind == Term::Kind::int_lit) {
        if (!tighten(classes[a], f.op, f.rhs.int_value)) return CubeResult::unsat;
      } else if (f.op == CmpOp::ne) {
        std::size_t b = uf.find(idx(f.rhs.name));
        if (a == b) return CubeResult::unsat;
        classes[a].neighbours.insert(b);
        classes[b].neighbours.insert(a);
      }
    }
    for (const auto& [_, k] : classes) {
      if (k.lo > k.hi || available(k, 1) == 0) return CubeResult::unsat;
    }

    // Peel classes with more admissible values than remaining neighbours;
    // they can always be coloured after the rest.
    std::set<std::size_t> core;
    for (const auto& [root, _] : classes) core.insert(root);
    std::vector<std::size_t> peeled;
    for (bool changed = true; changed;) {
      changed = false;
      for (auto it = core.begin(); it != core.end();) {
        const IntClass& k = classes[*it];
        std::size_t degree = 0;
        for (auto nb : k.neighbours) degree += core.contains(nb) ? 1 : 0;
        if (available(k, degree + 1) > degree) {
          peeled.push_back(*it);
          it = core.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
    }

    std::map<std::size_t, std::int64_t> value;
    std::vector<std::size_t> order(core.begin(), core.end());
    std::size_t nodes = 0;
    bool capped = false;
    auto admissible = [&](std::size_t root, std::int64_t v) {
      for (auto nb : classes[root].neighbours) {
        auto it = value.find(nb);
        if (it != value.end() && it->second == v) return false;
      }
      return true;
    };
    std::function<bool(std::size_t)> search = [&](std::size_t pos) -> bool {
      if (pos == order.size()) return true;
      std::size_t root = order[pos];
      const IntClass& k = classes[root];
      for (std::int64_t v : candidates(k, available(k, order.size() + 1))) {
        if (++nodes > limits_.max_search_nodes) {
          capped = true;
          return false;
        }
        if (!admissible(root, v)) continue;
        value[root] = v;
        if (search(pos + 1)) return true;
        if (capped) return false;
        value.erase(root);
      }
      return false;
    };
    if (!search(0)) return capped ? CubeResult::unknown : CubeResult::unsat;

    for (auto it = peeled.rbegin(); it != peeled.rend(); ++it) {
      const IntClass& k = classes[*it];
      bool placed = false;
      for (std::int64_t v : candidates(k, k.neighbours.size() + 1)) {
        if (admissible(*it, v)) {
          value[*it] = v;
          placed = true;
          break;
        }
      }
      if (!placed) return CubeResult::unknown;  // unreachable by the peeling argument
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (c_.variables[i].type == VarType::int_) witness[c_.variables[i].name] = value.at(uf.find(i));
    }
    return CubeResult::sat;
  }

  const PathConstraint& c_;
  const Cube& cube_;
  const SatLimits& limits_;
  std::map<std::string, std::size_t> index_;
  std::set<std::string> string_literals_;
};

}  // namespace

SatResult check_sat(const PathConstraint& c, const SatLimits& limits) {
  validate(c);
  Formula nnf = to_nnf(c.formula, false);
  std::vector<Cube> cubes;
  try {
    cubes = to_dnf(nnf, limits.max_cubes);
  } catch (const CubeOverflow&) {
    return Unknown{"more than " + std::to_string(limits.max_cubes) + " cubes"};
  }
  bool unknown = false;
  for (const auto& cube : cubes) {
    Assignment witness;
    switch (CubeSolver(c, cube, limits).solve(witness)) {
      case CubeResult::sat: return Sat{std::move(witness)};
      case CubeResult::unknown: unknown = true; break;
      case CubeResult::unsat: break;
    }
  }
  if (unknown) return Unknown{"search limit reached"};
  return Unsat{};
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

bool is_simple_symbol(const std::string& s) {
  static const std::set<std::string, std::less<>> reserved = {
      "_", "!", "as", "let", "exists", "forall", "match", "par", "assert", "check-sat", "declare-const",
      "declare-fun", "define-fun", "true", "false", "and", "or", "not", "distinct", "ite", "BINARY", "DECIMAL",
      "HEXADECIMAL", "NUMERAL", "STRING"};
  if (s.empty() || reserved.contains(s)) return false;
  auto symbol_char = [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || std::string_view("~!@$%^&*_-+=<>.?/").find(ch) != std::string_view::npos;
  };
  if (std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  return std::all_of(s.begin(), s.end(), symbol_char);
}

std::string smt_symbol(const std::string& s) { return is_simple_symbol(s) ? s : "|" + s + "|"; }

std::string smt_string(const std::string& s) {
  std::string out = "\"";
  for (unsigned char ch : s) {
    if (ch == '"') {
      out += "\"\"";
    } else if (ch == '\\' || ch < 0x20 || ch >= 0x7f) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "\\u{%x}", ch);
      out += buf;
    } else {
      out.push_back(static_cast<char>(ch));
    }
  }
  return out + "\"";
}

std::string smt_term(const Term& t) {
  switch (t.kind) {
    case Term::Kind::var: return smt_symbol(t.name);
    case Term::Kind::int_lit:
      if (t.int_value < 0) {
        // -(min) overflows; spell the magnitude from the unsigned value.
        auto magnitude = static_cast<std::uint64_t>(0) - static_cast<std::uint64_t>(t.int_value);
        return "(- " + std::to_string(magnitude) + ")";
      }
      return std::to_string(t.int_value);
    case Term::Kind::str_lit: return smt_string(t.str_value);
  }
  return "";
}

std::string smt_formula(const Formula& f) {
  switch (f.kind) {
    case Formula::Kind::true_: return "true";
    case Formula::Kind::false_: return "false";
    case Formula::Kind::bool_var: return smt_symbol(f.var);
    case Formula::Kind::not_: return "(not " + smt_formula(f.children[0]) + ")";
    case Formula::Kind::and_:
    case Formula::Kind::or_: {
      if (f.children.empty()) return f.kind == Formula::Kind::and_ ? "true" : "false";
      std::string out = f.kind == Formula::Kind::and_ ? "(and" : "(or";
      for (const auto& c : f.children) out += " " + smt_formula(c);
      return out + ")";
    }
    case Formula::Kind::cmp: break;
  }
  std::string l = smt_term(f.lhs), r = smt_term(f.rhs);
  switch (f.op) {
    case CmpOp::eq: return "(= " + l + " " + r + ")";
    case CmpOp::ne: return "(not (= " + l + " " + r + "))";
    case CmpOp::lt: return "(< " + l + " " + r + ")";
    case CmpOp::le: return "(<= " + l + " " + r + ")";
    case CmpOp::gt: return "(> " + l + " " + r + ")";
    case CmpOp::ge: return "(>= " + l + " " + r + ")";
  }
  return "";
}

std::string_view smt_sort(VarType t) {
  switch (t) {
    case VarType::int_: return "Int";
    case VarType::string: return "String";
    case VarType::bool_: return "Bool";
  }
  return "Int";
}

std::string quote_string(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out + "\"";
}

std::string render_term(const Term& t) {
  switch (t.kind) {
    case Term::Kind::var: return t.name;
    case Term::Kind::int_lit: return std::to_string(t.int_value);
    case Term::Kind::str_lit: return quote_string(t.str_value);
  }
  return "";
}

std::string render_at(const Formula& f, int parent) {
  switch (f.kind) {
    case Formula::Kind::true_: return "true";
    case Formula::Kind::false_: return "false";
    case Formula::Kind::bool_var: return f.var;
    case Formula::Kind::cmp: return render_term(f.lhs) + " " + std::string(to_string(f.op)) + " " + render_term(f.rhs);
    case Formula::Kind::not_: return "!(" + render_at(f.children[0], 0) + ")";
    case Formula::Kind::and_:
    case Formula::Kind::or_: {
      int prec = f.kind == Formula::Kind::and_ ? 2 : 1;
      std::string sep = f.kind == Formula::Kind::and_ ? " && " : " || ";
      std::string out;
      for (std::size_t i = 0; i < f.children.size(); ++i) {
        if (i) out += sep;
        out += render_at(f.children[i], prec);
      }
      if (f.children.empty()) out = f.kind == Formula::Kind::and_ ? "true" : "false";
      return prec < parent ? "(" + out + ")" : out;
    }
  }
  return "";
}

}  // namespace

std::string render(const Formula& f) { return render_at(f, 0); }

std::string emit_smtlib(const PathConstraint& c) {
  std::vector<Variable> vars = c.variables;
  std::sort(vars.begin(), vars.end(), [](const Variable& a, const Variable& b) { return a.name < b.name; });
  std::ostringstream os;
  for (const auto& v : vars) os << "(declare-const " << smt_symbol(v.name) << ' ' << smt_sort(v.type) << ")\n";
  if (c.formula.kind == Formula::Kind::and_) {
    for (const auto& conjunct : c.formula.children) os << "(assert " << smt_formula(conjunct) << ")\n";
  } else if (c.formula.kind != Formula::Kind::true_) {
    os << "(assert " << smt_formula(c.formula) << ")\n";
  }
  os << "(check-sat)\n";
  return os.str();
}

}  // namespace privflow
