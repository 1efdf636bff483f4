#pragma once

// MiniSrv: the small service language used to author test corpora.
// See docs/minisrv.md for the grammar.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "privflow/model.hpp"

namespace privflow::minisrv {

struct Span {
  std::size_t begin = 0;  // byte offsets into the parsed text
  std::size_t end = 0;
  Location loc;           // location of `begin`
};

enum class ExprKind { string_lit, int_lit, bool_lit, ident, member, call, binary };
enum class BinaryOp { eq, ne, lt, le, gt, ge, logical_and, logical_or, add };

std::string_view to_string(BinaryOp op);

struct Expr {
  ExprKind kind = ExprKind::ident;
  // string_lit: decoded value; int_lit/bool_lit: literal spelling;
  // ident: name; member: member name.
  std::string text;
  std::int64_t int_value = 0;
  BinaryOp op = BinaryOp::eq;
  // member: [base]; call: [callee, args...]; binary: [lhs, rhs]
  std::vector<Expr> children;
  Span span;
  // member: the member name token; call: last name token of the callee;
  // otherwise span.loc.
  Location name_loc;
};

enum class StmtKind { assign, call, if_stmt, return_stmt };

struct Stmt {
  StmtKind kind = StmtKind::call;
  std::string target;  // assign
  Location target_loc;
  std::vector<Expr> value;  // zero or one expression
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
  bool has_else = false;
  Span span;
};

struct Decorator {
  std::string name;  // "route" or "auth"
  std::vector<Expr> args;
  Span span;
};

struct Param {
  std::string name;
  Span span;
};

struct Function {
  std::string name;
  std::vector<Decorator> decorators;
  std::vector<Param> params;
  std::vector<Stmt> body;
  Span span;  // `fn` .. closing brace
};

struct Constant {
  std::string name;
  Expr value;
  Span span;
};

using Item = std::variant<Constant, Function>;

struct Ast {
  std::string file;
  std::string text;
  std::vector<Item> items;
};

/// Parses one MiniSrv file. Throws ParseError at the first error by position.
Ast parse_source(std::string_view text, std::string_view service_name, std::string_view file);

/// Parses a standalone expression (used by constraint extraction and channel
/// resolution on element source text). `origin` is the location of text[0].
Expr parse_expression(std::string_view text, const Location& origin);

/// Parses a standalone item (`fn ...` or `const ...`), e.g. a function
/// element's source text.
Item parse_item(std::string_view text, const Location& origin);

/// Canonical pretty printer. parse_source(print(ast)) is structurally equal
/// to `ast`.
std::string print(const Ast& ast);
std::string print(const Expr& expr);

/// Equality ignoring spans and locations.
bool structurally_equal(const Expr& a, const Expr& b);
bool structurally_equal(const Stmt& a, const Stmt& b);
bool structurally_equal(const Ast& a, const Ast& b);

/// Location of byte `offset` within `text`, given that text[0] sits at `origin`.
Location advance(const Location& origin, std::string_view text, std::size_t offset);

/// Intrinsic call names with special semantics.
enum class Intrinsic {
  none,
  request_param,
  session_get,
  http_post,
  http_get,
  publish,
  consume,
  db_read,
  db_write,
  exec,
};

/// Classifies a callee spelled as written (`request.param`, `http_post`, ...).
Intrinsic intrinsic_of(std::string_view callee_text);
std::string_view to_string(Intrinsic intrinsic);

/// Callee spelling of a call expression (`a.b.c` for member chains rooted at an
/// identifier, `f` for bare calls); empty if the callee is not a name chain.
std::string callee_text(const Expr& call);

/// Lowers the files of one service into facts. All files share one namespace
/// for functions and constants. Throws LoweringError.
Service lower(std::span<const Ast> files, std::string_view service_name);
Service lower(const Ast& ast, std::string_view service_name);

/// Call sites (bare calls, non-intrinsic) that did not resolve to a function
/// in the service. Recorded, not an error.
std::vector<std::string> unresolved_calls(const Service& service);

}  // namespace privflow::minisrv
