#include <algorithm>
#include <optional>
#include <set>
#include <tuple>

#include "privflow/constraints.hpp"
#include "privflow/error.hpp"
#include "privflow/minisrv.hpp"

namespace privflow {

namespace {

using minisrv::BinaryOp;
using minisrv::Expr;
using minisrv::ExprKind;
using minisrv::Stmt;
using minisrv::StmtKind;

struct SkipSignal {
  std::string reason;
};

std::optional<std::size_t> offset_of(const Location& origin, std::string_view text, const Location& loc) {
  Location cur = origin;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (cur.line == loc.line && cur.col == loc.col) return i;
    if (i == text.size()) break;
    if (text[i] == '\n') {
      ++cur.line;
      cur.col = 1;
    } else {
      ++cur.col;
    }
  }
  return std::nullopt;
}

bool inside(const minisrv::Span& span, std::size_t offset) { return offset >= span.begin && offset < span.end; }

bool inside_any(const std::vector<Stmt>& body, std::size_t offset) {
  return std::any_of(body.begin(), body.end(), [&](const Stmt& s) { return inside(s.span, offset); });
}

struct Guard {
  const Expr* cond;
  bool polarity;
  std::size_t scope;  // index of the function context
};

void collect_guards(const std::vector<Stmt>& body, std::size_t offset, std::size_t scope, std::vector<Guard>& out) {
  for (const auto& s : body) {
    if (s.kind != StmtKind::if_stmt || !inside(s.span, offset)) continue;
    if (inside_any(s.then_body, offset)) {
      out.push_back(Guard{&s.value[0], true, scope});
      collect_guards(s.then_body, offset, scope, out);
    } else if (inside_any(s.else_body, offset)) {
      out.push_back(Guard{&s.value[0], false, scope});
      collect_guards(s.else_body, offset, scope, out);
    }
  }
}

void count_assignments(const std::vector<Stmt>& body, std::map<std::string, int>& counts) {
  for (const auto& s : body) {
    if (s.kind == StmtKind::assign) ++counts[s.target];
    count_assignments(s.then_body, counts);
    count_assignments(s.else_body, counts);
  }
}

struct Scope {
  std::string prefix;  // "service/function."
  std::map<std::string, int> assignments;  // parameters count once
  const std::map<std::string, Expr>* constants = nullptr;
};

// An operand of a comparison after name resolution.
struct Operand {
  enum class Kind { var, int_lit, str_lit, bool_lit } kind = Kind::var;
  std::string name;
  std::int64_t int_value = 0;
  std::string str_value;
  bool bool_value = false;
};

std::optional<std::string> member_chain(const Expr& e) {
  if (e.kind == ExprKind::ident) return e.text;
  if (e.kind == ExprKind::member) {
    auto base = member_chain(e.children[0]);
    if (base) return *base + "." + e.text;
  }
  return std::nullopt;
}

const Expr& root_ident(const Expr& e) { return e.kind == ExprKind::member ? root_ident(e.children[0]) : e; }

Operand literal_operand(const Expr& e) {
  Operand o;
  switch (e.kind) {
    case ExprKind::int_lit:
      o.kind = Operand::Kind::int_lit;
      o.int_value = e.int_value;
      break;
    case ExprKind::string_lit:
      o.kind = Operand::Kind::str_lit;
      o.str_value = e.text;
      break;
    default:
      o.kind = Operand::Kind::bool_lit;
      o.bool_value = e.text == "true";
  }
  return o;
}

Operand operand(const Expr& e, const Scope& scope) {
  switch (e.kind) {
    case ExprKind::int_lit:
    case ExprKind::string_lit:
    case ExprKind::bool_lit: return literal_operand(e);
    case ExprKind::call: throw SkipSignal{"guard calls a function: " + minisrv::print(e)};
    case ExprKind::binary: throw SkipSignal{"compound operand in guard: " + minisrv::print(e)};
    case ExprKind::ident:
    case ExprKind::member: break;
  }
  auto chain = member_chain(e);
  if (!chain) throw SkipSignal{"unsupported operand: " + minisrv::print(e)};
  const std::string& root = root_ident(e).text;
  auto assigned = scope.assignments.find(root);
  if (assigned != scope.assignments.end() && assigned->second > 1) {
    throw SkipSignal{"'" + root + "' is assigned more than once"};
  }
  if (e.kind == ExprKind::ident && assigned == scope.assignments.end()) {
    if (auto c = scope.constants->find(root); c != scope.constants->end()) return literal_operand(c->second);
  }
  Operand o;
  o.name = scope.prefix + *chain;
  return o;
}

std::optional<CmpOp> cmp_of(BinaryOp op) {
  switch (op) {
    case BinaryOp::eq: return CmpOp::eq;
    case BinaryOp::ne: return CmpOp::ne;
    case BinaryOp::lt: return CmpOp::lt;
    case BinaryOp::le: return CmpOp::le;
    case BinaryOp::gt: return CmpOp::gt;
    case BinaryOp::ge: return CmpOp::ge;
    default: return std::nullopt;
  }
}

Term term_of(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::var: return Term::var(o.name);
    case Operand::Kind::int_lit: return Term::integer(o.int_value);
    case Operand::Kind::str_lit: return Term::string(o.str_value);
    case Operand::Kind::bool_lit: break;
  }
  return Term::integer(0);
}

std::optional<VarType> literal_type(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::int_lit: return VarType::int_;
    case Operand::Kind::str_lit: return VarType::string;
    case Operand::Kind::bool_lit: return VarType::bool_;
    case Operand::Kind::var: return std::nullopt;
  }
  return std::nullopt;
}

class Translator {
 public:
  // Pass one: record type evidence for every variable.
  void infer(const Expr& e, const Scope& scope) {
    if (e.kind == ExprKind::binary && (e.op == BinaryOp::logical_and || e.op == BinaryOp::logical_or)) {
      infer(e.children[0], scope);
      infer(e.children[1], scope);
      return;
    }
    if (e.kind == ExprKind::binary && cmp_of(e.op)) {
      Operand a = operand(e.children[0], scope);
      Operand b = operand(e.children[1], scope);
      bool ordering = *cmp_of(e.op) != CmpOp::eq && *cmp_of(e.op) != CmpOp::ne;
      if (a.kind == Operand::Kind::var && b.kind == Operand::Kind::var) {
        if (ordering) throw SkipSignal{"ordering between two variables: " + minisrv::print(e)};
        declare(a.name);
        declare(b.name);
        links_.emplace_back(a.name, b.name);
        return;
      }
      for (const auto* o : {&a, &b}) {
        if (o->kind != Operand::Kind::var) continue;
        const Operand& other = o == &a ? b : a;
        VarType t = *literal_type(other);
        if (ordering && t != VarType::int_) throw SkipSignal{"ordering on a non-integer: " + minisrv::print(e)};
        assign(o->name, t);
      }
      return;
    }
    if (e.kind == ExprKind::ident || e.kind == ExprKind::member) {
      Operand o = operand(e, scope);
      if (o.kind == Operand::Kind::var) {
        assign(o.name, VarType::bool_);
      } else if (o.kind != Operand::Kind::bool_lit) {
        throw SkipSignal{"non-boolean condition: " + minisrv::print(e)};
      }
      return;
    }
    if (e.kind == ExprKind::bool_lit) return;
    if (e.kind == ExprKind::call) throw SkipSignal{"guard calls a function: " + minisrv::print(e)};
    throw SkipSignal{"condition outside the fragment: " + minisrv::print(e)};
  }

  // Unknown var-var comparisons default to strings.
  void resolve() {
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& [a, b] : links_) {
        auto ta = types_.at(a), tb = types_.at(b);
        if (ta && tb && *ta != *tb) throw SkipSignal{"type conflict between " + a + " and " + b};
        if (ta && !tb) {
          types_[b] = ta;
          changed = true;
        } else if (tb && !ta) {
          types_[a] = tb;
          changed = true;
        }
      }
    }
    for (auto& [name, t] : types_) {
      if (!t) t = VarType::string;
    }
    for (const auto& [a, b] : links_) {
      if (*types_.at(a) == VarType::bool_) throw SkipSignal{"comparison of two booleans: " + a + ", " + b};
    }
  }

  // Pass two: build the formula.
  Formula build(const Expr& e, const Scope& scope) const {
    if (e.kind == ExprKind::binary && (e.op == BinaryOp::logical_and || e.op == BinaryOp::logical_or)) {
      std::vector<Formula> parts{build(e.children[0], scope), build(e.children[1], scope)};
      return e.op == BinaryOp::logical_and ? Formula::conj(std::move(parts)) : Formula::disj(std::move(parts));
    }
    if (e.kind == ExprKind::bool_lit) return Formula::truth(e.text == "true");
    if (e.kind != ExprKind::binary) {
      Operand o = operand(e, scope);
      if (o.kind == Operand::Kind::bool_lit) return Formula::truth(o.bool_value);
      return Formula::boolean(o.name);
    }
    CmpOp op = *cmp_of(e.op);
    Operand a = operand(e.children[0], scope);
    Operand b = operand(e.children[1], scope);
    if (a.kind != Operand::Kind::var && b.kind != Operand::Kind::var) return fold(a, op, b, e);
    if (a.kind == Operand::Kind::bool_lit) std::swap(a, b);
    if (b.kind == Operand::Kind::bool_lit) {
      if (op != CmpOp::eq && op != CmpOp::ne) throw SkipSignal{"ordering on booleans: " + minisrv::print(e)};
      bool positive = (op == CmpOp::eq) == b.bool_value;
      Formula v = Formula::boolean(a.name);
      return positive ? v : Formula::negation(std::move(v));
    }
    return Formula::compare(term_of(a), op, term_of(b));
  }

  std::vector<Variable> variables() const {
    std::vector<Variable> out;
    for (const auto& [name, t] : types_) out.push_back(Variable{name, *t});
    return out;
  }

 private:
  void declare(const std::string& name) { types_.try_emplace(name); }

  void assign(const std::string& name, VarType t) {
    auto& slot = types_[name];
    if (slot && *slot != t) throw SkipSignal{"type conflict on " + name};
    slot = t;
  }

  static Formula fold(const Operand& a, CmpOp op, const Operand& b, const Expr& e) {
    if (a.kind != b.kind) throw SkipSignal{"comparison of unrelated constants: " + minisrv::print(e)};
    bool ordering = op != CmpOp::eq && op != CmpOp::ne;
    auto cmp = [&](auto x, auto y) {
      switch (op) {
        case CmpOp::eq: return x == y;
        case CmpOp::ne: return x != y;
        case CmpOp::lt: return x < y;
        case CmpOp::le: return x <= y;
        case CmpOp::gt: return x > y;
        case CmpOp::ge: return x >= y;
      }
      return false;
    };
    switch (a.kind) {
      case Operand::Kind::int_lit: return Formula::truth(cmp(a.int_value, b.int_value));
      case Operand::Kind::str_lit:
        if (ordering) break;
        return Formula::truth(cmp(a.str_value, b.str_value));
      case Operand::Kind::bool_lit:
        if (ordering) break;
        return Formula::truth(cmp(a.bool_value, b.bool_value));
      case Operand::Kind::var: break;
    }
    throw SkipSignal{"comparison outside the fragment: " + minisrv::print(e)};
  }

  std::map<std::string, std::optional<VarType>> types_;
  std::vector<std::pair<std::string, std::string>> links_;
};

std::map<std::string, Expr> parse_constants(const std::vector<std::string>& sources) {
  std::map<std::string, Expr> out;
  for (const auto& src : sources) {
    auto item = minisrv::parse_item(src, Location{"<const>", 1, 1});
    if (const auto* c = std::get_if<minisrv::Constant>(&item)) out[c->name] = c->value;
  }
  return out;
}

}  // namespace

Extraction extract_guards(const std::vector<GuardContext>& contexts,
                          const std::map<std::string, std::vector<std::string>>& constants) {
  try {
    std::map<std::string, std::map<std::string, Expr>> consts_by_service;
    for (const auto& [service, sources] : constants) consts_by_service[service] = parse_constants(sources);
    static const std::map<std::string, Expr> no_constants;

    std::vector<minisrv::Function> functions;
    std::vector<Scope> scopes;
    for (const auto& ctx : contexts) {
      auto item = minisrv::parse_item(ctx.source, ctx.origin);
      auto* fn = std::get_if<minisrv::Function>(&item);
      if (fn == nullptr) throw SkipSignal{"context is not a function: " + ctx.function};
      Scope scope;
      scope.prefix = ctx.service + "/" + ctx.function + ".";
      for (const auto& p : fn->params) scope.assignments[p.name] = 1;
      count_assignments(fn->body, scope.assignments);
      auto c = consts_by_service.find(ctx.service);
      scope.constants = c == consts_by_service.end() ? &no_constants : &c->second;
      functions.push_back(std::move(*fn));
      scopes.push_back(std::move(scope));
    }

    std::vector<Guard> guards;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      for (const auto& node : contexts[i].nodes) {
        auto offset = offset_of(contexts[i].origin, contexts[i].source, node);
        if (!offset) continue;
        collect_guards(functions[i].body, *offset, i, guards);
      }
    }
    // One conjunct per distinct (conditional, branch).
    std::set<std::tuple<std::size_t, std::size_t, bool>> seen;
    std::vector<Guard> unique;
    for (const auto& g : guards) {
      if (seen.emplace(g.scope, g.cond->span.begin, g.polarity).second) unique.push_back(g);
    }

    Translator tr;
    for (const auto& g : unique) tr.infer(*g.cond, scopes[g.scope]);
    tr.resolve();
    std::vector<Formula> conjuncts;
    for (const auto& g : unique) {
      Formula f = tr.build(*g.cond, scopes[g.scope]);
      conjuncts.push_back(g.polarity ? std::move(f) : Formula::negation(std::move(f)));
    }
    PathConstraint pc;
    pc.variables = tr.variables();
    if (conjuncts.size() == 1) {
      pc.formula = std::move(conjuncts.front());
    } else if (!conjuncts.empty()) {
      pc.formula.kind = Formula::Kind::and_;
      pc.formula.children = std::move(conjuncts);
    }
    return pc;
  } catch (const SkipSignal& s) {
    return Skipped{s.reason};
  } catch (const ParseError& e) {
    return Skipped{std::string("unparsable context: ") + e.what()};
  }
}

}  // namespace privflow
