#include <sstream>

#include "privflow/minisrv.hpp"

namespace privflow::minisrv {

namespace {

int precedence(const Expr& e) {
  if (e.kind != ExprKind::binary) return 6;
  switch (e.op) {
    case BinaryOp::logical_or: return 1;
    case BinaryOp::logical_and: return 2;
    case BinaryOp::eq:
    case BinaryOp::ne: return 3;
    case BinaryOp::lt:
    case BinaryOp::le:
    case BinaryOp::gt:
    case BinaryOp::ge: return 4;
    case BinaryOp::add: return 5;
  }
  return 6;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

void print_expr(std::ostream& os, const Expr& e) {
  switch (e.kind) {
    case ExprKind::string_lit: os << quote(e.text); return;
    case ExprKind::int_lit: os << e.int_value; return;
    case ExprKind::bool_lit:
    case ExprKind::ident: os << e.text; return;
    case ExprKind::member:
      print_expr(os, e.children[0]);
      os << '.' << e.text;
      return;
    case ExprKind::call:
      print_expr(os, e.children[0]);
      os << '(';
      for (std::size_t i = 1; i < e.children.size(); ++i) {
        if (i > 1) os << ", ";
        print_expr(os, e.children[i]);
      }
      os << ')';
      return;
    case ExprKind::binary: {
      int p = precedence(e);
      const Expr& lhs = e.children[0];
      const Expr& rhs = e.children[1];
      bool wrap_l = precedence(lhs) < p;
      bool wrap_r = precedence(rhs) <= p;
      if (wrap_l) os << '(';
      print_expr(os, lhs);
      if (wrap_l) os << ')';
      os << ' ' << to_string(e.op) << ' ';
      if (wrap_r) os << '(';
      print_expr(os, rhs);
      if (wrap_r) os << ')';
      return;
    }
  }
}

void print_block(std::ostream& os, const std::vector<Stmt>& body, int depth);

void print_stmt(std::ostream& os, const Stmt& s, int depth) {
  std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (s.kind) {
    case StmtKind::assign:
      os << pad << s.target << " = ";
      print_expr(os, s.value[0]);
      os << '\n';
      return;
    case StmtKind::call:
      os << pad;
      print_expr(os, s.value[0]);
      os << '\n';
      return;
    case StmtKind::return_stmt:
      os << pad << "return";
      if (!s.value.empty()) {
        os << ' ';
        print_expr(os, s.value[0]);
      }
      os << '\n';
      return;
    case StmtKind::if_stmt:
      os << pad << "if ";
      print_expr(os, s.value[0]);
      os << " {\n";
      print_block(os, s.then_body, depth + 1);
      os << pad << '}';
      if (s.has_else) {
        os << " else {\n";
        print_block(os, s.else_body, depth + 1);
        os << pad << '}';
      }
      os << '\n';
      return;
  }
}

void print_block(std::ostream& os, const std::vector<Stmt>& body, int depth) {
  for (const auto& s : body) print_stmt(os, s, depth);
}

}  // namespace

std::string print(const Expr& expr) {
  std::ostringstream os;
  print_expr(os, expr);
  return os.str();
}

std::string print(const Ast& ast) {
  std::ostringstream os;
  bool first = true;
  for (const auto& item : ast.items) {
    if (!first) os << '\n';
    first = false;
    if (const auto* c = std::get_if<Constant>(&item)) {
      os << "const " << c->name << " = ";
      print_expr(os, c->value);
      os << '\n';
      continue;
    }
    const auto& f = std::get<Function>(item);
    for (const auto& d : f.decorators) {
      os << '@' << d.name << '(';
      for (std::size_t i = 0; i < d.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, d.args[i]);
      }
      os << ")\n";
    }
    os << "fn " << f.name << '(';
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      if (i) os << ", ";
      os << f.params[i].name;
    }
    os << ") {\n";
    print_block(os, f.body, 1);
    os << "}\n";
  }
  return os.str();
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
  switch (a.kind) {
    case ExprKind::int_lit:
      if (a.int_value != b.int_value) return false;
      break;
    case ExprKind::binary:
      if (a.op != b.op) return false;
      break;
    case ExprKind::call: break;
    default:
      if (a.text != b.text) return false;
  }
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(a.children[i], b.children[i])) return false;
  }
  return true;
}

namespace {

bool equal_exprs(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!structurally_equal(a[i], b[i])) return false;
  }
  return true;
}

bool equal_stmts(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!structurally_equal(a[i], b[i])) return false;
  }
  return true;
}

}  // namespace

bool structurally_equal(const Stmt& a, const Stmt& b) {
  return a.kind == b.kind && a.target == b.target && a.has_else == b.has_else && equal_exprs(a.value, b.value) &&
         equal_stmts(a.then_body, b.then_body) && equal_stmts(a.else_body, b.else_body);
}

bool structurally_equal(const Ast& a, const Ast& b) {
  if (a.items.size() != b.items.size()) return false;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    const Item& x = a.items[i];
    const Item& y = b.items[i];
    if (x.index() != y.index()) return false;
    if (const auto* c = std::get_if<Constant>(&x)) {
      const auto& d = std::get<Constant>(y);
      if (c->name != d.name || !structurally_equal(c->value, d.value)) return false;
      continue;
    }
    const auto& f = std::get<Function>(x);
    const auto& g = std::get<Function>(y);
    if (f.name != g.name || f.params.size() != g.params.size() || f.decorators.size() != g.decorators.size()) {
      return false;
    }
    for (std::size_t j = 0; j < f.params.size(); ++j) {
      if (f.params[j].name != g.params[j].name) return false;
    }
    for (std::size_t j = 0; j < f.decorators.size(); ++j) {
      if (f.decorators[j].name != g.decorators[j].name || !equal_exprs(f.decorators[j].args, g.decorators[j].args)) {
        return false;
      }
    }
    if (!equal_stmts(f.body, g.body)) return false;
  }
  return true;
}

}  // namespace privflow::minisrv
