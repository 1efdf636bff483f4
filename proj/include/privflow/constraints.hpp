#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "privflow/model.hpp"

namespace privflow {

enum class VarType { int_, string, bool_ };

std::string_view to_string(VarType type);

struct Variable {
  std::string name;
  VarType type = VarType::int_;

  bool operator==(const Variable&) const = default;
};

enum class CmpOp { eq, ne, lt, le, gt, ge };

std::string_view to_string(CmpOp op);
CmpOp negate(CmpOp op);

struct Term {
  enum class Kind { var, int_lit, str_lit };
  Kind kind = Kind::var;
  std::string name;  // var
  std::int64_t int_value = 0;
  std::string str_value;

  static Term var(std::string name) { return Term{Kind::var, std::move(name), 0, {}}; }
  static Term integer(std::int64_t v) { return Term{Kind::int_lit, {}, v, {}}; }
  static Term string(std::string v) { return Term{Kind::str_lit, {}, 0, std::move(v)}; }

  bool operator==(const Term&) const = default;
};

/// Boolean combination of fragment atoms:
///   int-var op int-constant, int-var ==/!= int-var,
///   string-var ==/!= (string-literal | string-var), bool-var, true/false.
/// Constants may sit on either side of a comparison.
struct Formula {
  enum class Kind { true_, false_, bool_var, cmp, and_, or_, not_ };
  Kind kind = Kind::true_;
  std::string var;  // bool_var
  CmpOp op = CmpOp::eq;
  Term lhs, rhs;  // cmp
  std::vector<Formula> children;

  static Formula truth(bool value);
  static Formula boolean(std::string var);
  static Formula compare(Term lhs, CmpOp op, Term rhs);
  static Formula conj(std::vector<Formula> children);
  static Formula disj(std::vector<Formula> children);
  static Formula negation(Formula child);

  bool operator==(const Formula&) const = default;
};

struct PathConstraint {
  std::vector<Variable> variables;
  Formula formula;  // Formula::truth(true) is the empty conjunction

  bool operator==(const PathConstraint&) const = default;
};

/// Throws ConstraintError if an atom falls outside the fragment, references an
/// undeclared variable, or mixes types.
void validate(const PathConstraint& c);

using Value = std::variant<std::int64_t, std::string, bool>;
using Assignment = std::map<std::string, Value>;

struct Sat {
  Assignment witness;
};
struct Unsat {};
struct Unknown {
  std::string reason;
};
using SatResult = std::variant<Sat, Unsat, Unknown>;

struct SatLimits {
  std::size_t max_cubes = 4096;
  std::size_t max_search_nodes = 100000;
};

/// Decides satisfiability within the fragment. Unsat is only returned when no
/// model exists; Sat always carries a witness.
SatResult check_sat(const PathConstraint& c, const SatLimits& limits = {});

/// Throws MissingVariable if a declared variable has no value.
bool eval_witness(const PathConstraint& c, const Assignment& assignment);

/// SMT-LIB v2: sorted declare-const lines, one assert per top-level conjunct,
/// trailing (check-sat).
std::string emit_smtlib(const PathConstraint& c);

std::string render(const Formula& f);  // infix, for rationales and reports

// ---------------------------------------------------------------------------
// Syntactic guard extraction over MiniSrv-shaped function sources.

/// One function on a flow: its verbatim source, where that source starts, and
/// the locations of the flow's nodes inside it.
struct GuardContext {
  std::string service;
  std::string function;
  std::string source;
  Location origin;
  std::vector<Location> nodes;
};

struct Skipped {
  std::string reason;
};

using Extraction = std::variant<PathConstraint, Skipped>;

/// Conjunction of every conditional guard (with branch polarity) enclosing a
/// node. `constants` are `const NAME = literal` item sources of the services
/// involved, keyed by service. Anything outside the fragment yields Skipped.
Extraction extract_guards(const std::vector<GuardContext>& contexts,
                          const std::map<std::string, std::vector<std::string>>& constants);

}  // namespace privflow
