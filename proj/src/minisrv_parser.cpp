#include <cctype>
#include <charconv>
#include <optional>

#include "privflow/error.hpp"
#include "privflow/minisrv.hpp"

namespace privflow::minisrv {

namespace {

enum class Tok {
  ident,
  kw_const,
  kw_fn,
  kw_if,
  kw_else,
  kw_return,
  kw_true,
  kw_false,
  string,
  integer,
  at,
  lparen,
  rparen,
  lbrace,
  rbrace,
  comma,
  semicolon,
  dot,
  assign,
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  and_and,
  or_or,
  plus,
  eof,
  error,
};

struct Token {
  Tok kind = Tok::eof;
  std::string text;  // identifier/keyword spelling, decoded string, digits, or error message
  std::size_t begin = 0;
  std::size_t end = 0;
  Location loc;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::eof: return "end of input";
    case Tok::string: return "string literal";
    case Tok::integer: return "integer literal";
    case Tok::ident: return "identifier '" + t.text + "'";
    default: return "'" + t.text + "'";
  }
}

class Lexer {
 public:
  Lexer(std::string_view text, Location origin) : text_(text), loc_(std::move(origin)) {}

  Token next() {
    skip_trivia();
    Token t;
    t.begin = pos_;
    t.loc = loc_;
    if (pos_ >= text_.size()) {
      t.kind = Tok::eof;
      t.end = pos_;
      return t;
    }
    char c = text_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        bump();
      }
      t.text = std::string(text_.substr(t.begin, pos_ - t.begin));
      t.kind = keyword(t.text);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
      bump();
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) bump();
      t.kind = Tok::integer;
      t.text = std::string(text_.substr(t.begin, pos_ - t.begin));
    } else if (c == '"') {
      lex_string(t);
    } else {
      lex_punct(t);
    }
    t.end = pos_;
    return t;
  }

 private:
  static Tok keyword(std::string_view s) {
    if (s == "const") return Tok::kw_const;
    if (s == "fn") return Tok::kw_fn;
    if (s == "if") return Tok::kw_if;
    if (s == "else") return Tok::kw_else;
    if (s == "return") return Tok::kw_return;
    if (s == "true") return Tok::kw_true;
    if (s == "false") return Tok::kw_false;
    return Tok::ident;
  }

  void bump() {
    if (text_[pos_] == '\n') {
      ++loc_.line;
      loc_.col = 1;
    } else {
      ++loc_.col;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') bump();
      } else {
        break;
      }
    }
  }

  void lex_string(Token& t) {
    bump();  // opening quote
    std::string value;
    while (true) {
      if (pos_ >= text_.size() || text_[pos_] == '\n') {
        t.kind = Tok::error;
        t.text = "unterminated string literal";
        return;
      }
      char c = text_[pos_];
      if (c == '"') {
        bump();
        break;
      }
      if (c == '\\') {
        bump();
        if (pos_ >= text_.size()) continue;
        char esc = text_[pos_];
        switch (esc) {
          case 'n': value.push_back('\n'); break;
          case 't': value.push_back('\t'); break;
          case '"': value.push_back('"'); break;
          case '\\': value.push_back('\\'); break;
          default:
            t.kind = Tok::error;
            t.text = std::string("unknown escape '\\") + esc + "'";
            return;
        }
        bump();
        continue;
      }
      value.push_back(c);
      bump();
    }
    t.kind = Tok::string;
    t.text = std::move(value);
  }

  void lex_punct(Token& t) {
    char c = text_[pos_];
    char n = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    auto two = [&](Tok k, const char* spelling) {
      bump();
      bump();
      t.kind = k;
      t.text = spelling;
    };
    auto one = [&](Tok k) {
      t.text = std::string(1, c);
      bump();
      t.kind = k;
    };
    switch (c) {
      case '@': one(Tok::at); break;
      case '(': one(Tok::lparen); break;
      case ')': one(Tok::rparen); break;
      case '{': one(Tok::lbrace); break;
      case '}': one(Tok::rbrace); break;
      case ',': one(Tok::comma); break;
      case ';': one(Tok::semicolon); break;
      case '.': one(Tok::dot); break;
      case '+': one(Tok::plus); break;
      case '=': n == '=' ? two(Tok::eq, "==") : one(Tok::assign); break;
      case '!':
        if (n == '=') {
          two(Tok::ne, "!=");
        } else {
          t.kind = Tok::error;
          t.text = "unexpected character '!'";
          bump();
        }
        break;
      case '<': n == '=' ? two(Tok::le, "<=") : one(Tok::lt); break;
      case '>': n == '=' ? two(Tok::ge, ">=") : one(Tok::gt); break;
      case '&':
        if (n == '&') {
          two(Tok::and_and, "&&");
        } else {
          t.kind = Tok::error;
          t.text = "unexpected character '&'";
          bump();
        }
        break;
      case '|':
        if (n == '|') {
          two(Tok::or_or, "||");
        } else {
          t.kind = Tok::error;
          t.text = "unexpected character '|'";
          bump();
        }
        break;
      default:
        t.kind = Tok::error;
        t.text = std::string("unexpected character '") + c + "'";
        bump();
        break;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Location loc_;
};

class Parser {
 public:
  Parser(std::string_view text, Location origin) : text_(text), lexer_(text, std::move(origin)) {
    cur_ = lexer_.next();
    peek_ = lexer_.next();
  }

  Ast parse_file(std::string file) {
    Ast ast;
    ast.file = std::move(file);
    ast.text = std::string(text_);
    while (cur_.kind != Tok::eof) ast.items.push_back(parse_item());
    return ast;
  }

  Item parse_single_item() {
    Item item = parse_item();
    expect_end();
    return item;
  }

  Expr parse_single_expression() {
    Expr e = parse_expr();
    expect_end();
    return e;
  }

 private:
  [[noreturn]] void fail(const Token& at, std::string expected) {
    if (at.kind == Tok::error) throw ParseError(at.loc, at.text, "");
    throw ParseError(at.loc, "unexpected " + describe(at), std::move(expected));
  }

  void expect_end() {
    if (cur_.kind != Tok::eof) fail(cur_, "end of input");
  }

  void advance() {
    prev_end_ = cur_.end;
    cur_ = std::move(peek_);
    peek_ = cur_.kind == Tok::eof ? cur_ : lexer_.next();
  }

  Token expect(Tok kind, const char* expected) {
    if (cur_.kind != kind) fail(cur_, expected);
    Token t = cur_;
    advance();
    return t;
  }

  Span span_from(const Token& start) const { return Span{start.begin, prev_end_, start.loc}; }
  Span span_from(const Span& start) const { return Span{start.begin, prev_end_, start.loc}; }

  Item parse_item() {
    if (cur_.kind == Tok::kw_const) return parse_const();
    if (cur_.kind == Tok::at || cur_.kind == Tok::kw_fn) return parse_function();
    fail(cur_, "'const', '@' or 'fn'");
  }

  Constant parse_const() {
    Token start = expect(Tok::kw_const, "'const'");
    Constant c;
    c.name = expect(Tok::ident, "constant name").text;
    expect(Tok::assign, "'='");
    if (!is_literal(cur_.kind)) fail(cur_, "literal");
    c.value = parse_primary();
    c.span = span_from(start);
    if (cur_.kind == Tok::semicolon) advance();
    return c;
  }

  static bool is_literal(Tok k) {
    return k == Tok::string || k == Tok::integer || k == Tok::kw_true || k == Tok::kw_false;
  }

  Decorator parse_decorator() {
    Token start = expect(Tok::at, "'@'");
    Decorator d;
    Token name = cur_;
    d.name = expect(Tok::ident, "decorator name").text;
    if (d.name != "route" && d.name != "auth") {
      throw ParseError(name.loc, "unknown decorator '" + d.name + "'", "'route' or 'auth'");
    }
    expect(Tok::lparen, "'('");
    if (cur_.kind != Tok::rparen) {
      while (true) {
        if (!is_literal(cur_.kind) && cur_.kind != Tok::ident) fail(cur_, "literal or identifier");
        d.args.push_back(parse_primary());
        if (cur_.kind != Tok::comma) break;
        advance();
      }
    }
    Token close = cur_;
    expect(Tok::rparen, "',' or ')'");
    d.span = span_from(start);
    if (d.name == "route") {
      if (d.args.size() != 2 || d.args[0].kind != ExprKind::string_lit || d.args[1].kind != ExprKind::string_lit) {
        throw ParseError(start.loc, "@route takes (method, path) string literals", "@route(\"METHOD\", \"/path\")");
      }
      if (d.args[1].text.empty() || d.args[1].text.front() != '/') {
        throw ParseError(d.args[1].span.loc, "route path must start with '/'", "absolute path");
      }
    } else {
      if (d.args.empty()) throw ParseError(close.loc, "@auth needs at least one check function", "identifier");
      for (const auto& a : d.args) {
        if (a.kind != ExprKind::ident) throw ParseError(a.span.loc, "@auth arguments must be function names", "identifier");
      }
    }
    return d;
  }

  Function parse_function() {
    Function f;
    while (cur_.kind == Tok::at) f.decorators.push_back(parse_decorator());
    Token start = expect(Tok::kw_fn, f.decorators.empty() ? "'fn'" : "'@' or 'fn'");
    f.name = expect(Tok::ident, "function name").text;
    expect(Tok::lparen, "'('");
    if (cur_.kind != Tok::rparen) {
      while (true) {
        Token p = cur_;
        if (p.kind != Tok::ident) fail(p, f.params.empty() ? "parameter or \")\"" : "parameter");
        advance();
        f.params.push_back(Param{p.text, Span{p.begin, p.end, p.loc}});
        if (cur_.kind != Tok::comma) break;
        advance();
      }
    }
    expect(Tok::rparen, "',' or \")\"");
    f.body = parse_block();
    f.span = span_from(start);
    return f;
  }

  std::vector<Stmt> parse_block() {
    expect(Tok::lbrace, "'{'");
    std::vector<Stmt> body;
    while (cur_.kind != Tok::rbrace) {
      if (cur_.kind == Tok::eof || cur_.kind == Tok::error) fail(cur_, "statement or '}'");
      body.push_back(parse_stmt());
      if (cur_.kind == Tok::semicolon) advance();
    }
    advance();
    return body;
  }

  Stmt parse_stmt() {
    Token start = cur_;
    Stmt s;
    if (cur_.kind == Tok::kw_if) return parse_if();
    if (cur_.kind == Tok::kw_return) {
      advance();
      s.kind = StmtKind::return_stmt;
      if (cur_.kind != Tok::rbrace && cur_.kind != Tok::semicolon) s.value.push_back(parse_expr());
      s.span = span_from(start);
      return s;
    }
    if (cur_.kind == Tok::ident && peek_.kind == Tok::assign) {
      s.kind = StmtKind::assign;
      s.target = cur_.text;
      s.target_loc = cur_.loc;
      advance();
      advance();
      s.value.push_back(parse_expr());
      s.span = span_from(start);
      return s;
    }
    if (cur_.kind != Tok::ident) fail(cur_, "statement");
    Expr e = parse_expr();
    if (e.kind != ExprKind::call) throw ParseError(start.loc, "expression statement must be a call", "call");
    s.kind = StmtKind::call;
    s.value.push_back(std::move(e));
    s.span = span_from(start);
    return s;
  }

  Stmt parse_if() {
    Token start = expect(Tok::kw_if, "'if'");
    Stmt s;
    s.kind = StmtKind::if_stmt;
    s.value.push_back(parse_expr());
    s.then_body = parse_block();
    if (cur_.kind == Tok::kw_else) {
      advance();
      s.has_else = true;
      if (cur_.kind == Tok::kw_if) {
        s.else_body.push_back(parse_if());
      } else {
        s.else_body = parse_block();
      }
    }
    s.span = span_from(start);
    return s;
  }

  Expr parse_expr() { return parse_or(); }

  Expr make_binary(BinaryOp op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::binary;
    e.op = op;
    e.span = Span{lhs.span.begin, rhs.span.end, lhs.span.loc};
    e.name_loc = lhs.span.loc;
    e.text = std::string(to_string(op));
    e.children.push_back(std::move(lhs));
    e.children.push_back(std::move(rhs));
    return e;
  }

  Expr parse_or() {
    Expr lhs = parse_and();
    while (cur_.kind == Tok::or_or) {
      advance();
      lhs = make_binary(BinaryOp::logical_or, std::move(lhs), parse_and());
    }
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_equality();
    while (cur_.kind == Tok::and_and) {
      advance();
      lhs = make_binary(BinaryOp::logical_and, std::move(lhs), parse_equality());
    }
    return lhs;
  }

  Expr parse_equality() {
    Expr lhs = parse_relational();
    while (cur_.kind == Tok::eq || cur_.kind == Tok::ne) {
      BinaryOp op = cur_.kind == Tok::eq ? BinaryOp::eq : BinaryOp::ne;
      advance();
      lhs = make_binary(op, std::move(lhs), parse_relational());
    }
    return lhs;
  }

  Expr parse_relational() {
    Expr lhs = parse_additive();
    while (true) {
      BinaryOp op;
      switch (cur_.kind) {
        case Tok::lt: op = BinaryOp::lt; break;
        case Tok::le: op = BinaryOp::le; break;
        case Tok::gt: op = BinaryOp::gt; break;
        case Tok::ge: op = BinaryOp::ge; break;
        default: return lhs;
      }
      advance();
      lhs = make_binary(op, std::move(lhs), parse_additive());
    }
  }

  Expr parse_additive() {
    Expr lhs = parse_postfix();
    while (cur_.kind == Tok::plus) {
      advance();
      lhs = make_binary(BinaryOp::add, std::move(lhs), parse_postfix());
    }
    return lhs;
  }

  Expr parse_postfix() {
    Expr e = parse_primary();
    while (true) {
      if (cur_.kind == Tok::dot) {
        advance();
        Token name = expect(Tok::ident, "member name");
        Expr m;
        m.kind = ExprKind::member;
        m.text = name.text;
        m.name_loc = name.loc;
        m.span = Span{e.span.begin, name.end, e.span.loc};
        m.children.push_back(std::move(e));
        e = std::move(m);
      } else if (cur_.kind == Tok::lparen) {
        if (e.kind != ExprKind::ident && e.kind != ExprKind::member) {
          throw ParseError(cur_.loc, "call target must be a name or member access", "name");
        }
        advance();
        Expr call;
        call.kind = ExprKind::call;
        call.name_loc = e.name_loc;
        Span start = e.span;
        call.children.push_back(std::move(e));
        if (cur_.kind != Tok::rparen) {
          while (true) {
            call.children.push_back(parse_expr());
            if (cur_.kind != Tok::comma) break;
            advance();
          }
        }
        expect(Tok::rparen, "',' or ')'");
        call.span = span_from(start);
        e = std::move(call);
      } else {
        return e;
      }
    }
  }

  Expr parse_primary() {
    Token t = cur_;
    Expr e;
    e.span = Span{t.begin, t.end, t.loc};
    e.name_loc = t.loc;
    switch (t.kind) {
      case Tok::string:
        e.kind = ExprKind::string_lit;
        e.text = t.text;
        break;
      case Tok::integer: {
        e.kind = ExprKind::int_lit;
        e.text = t.text;
        auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), e.int_value);
        if (ec != std::errc()) throw ParseError(t.loc, "integer literal out of range", "");
        break;
      }
      case Tok::kw_true:
      case Tok::kw_false:
        e.kind = ExprKind::bool_lit;
        e.text = t.text;
        break;
      case Tok::ident:
        e.kind = ExprKind::ident;
        e.text = t.text;
        break;
      case Tok::lparen: {
        advance();
        Expr inner = parse_expr();
        expect(Tok::rparen, "')'");
        return inner;
      }
      default: fail(t, "expression");
    }
    advance();
    return e;
  }

  std::string_view text_;
  Lexer lexer_;
  Token cur_;
  Token peek_;
  std::size_t prev_end_ = 0;
};

}  // namespace

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::eq: return "==";
    case BinaryOp::ne: return "!=";
    case BinaryOp::lt: return "<";
    case BinaryOp::le: return "<=";
    case BinaryOp::gt: return ">";
    case BinaryOp::ge: return ">=";
    case BinaryOp::logical_and: return "&&";
    case BinaryOp::logical_or: return "||";
    case BinaryOp::add: return "+";
  }
  return "?";
}

Ast parse_source(std::string_view text, std::string_view /*service_name*/, std::string_view file) {
  Parser p(text, Location{std::string(file), 1, 1});
  return p.parse_file(std::string(file));
}

Expr parse_expression(std::string_view text, const Location& origin) {
  Parser p(text, origin);
  return p.parse_single_expression();
}

Item parse_item(std::string_view text, const Location& origin) {
  Parser p(text, origin);
  return p.parse_single_item();
}

Location advance(const Location& origin, std::string_view text, std::size_t offset) {
  Location loc = origin;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++loc.line;
      loc.col = 1;
    } else {
      ++loc.col;
    }
  }
  return loc;
}

Intrinsic intrinsic_of(std::string_view callee) {
  if (callee == "request.param") return Intrinsic::request_param;
  if (callee == "session.get") return Intrinsic::session_get;
  if (callee == "http_post") return Intrinsic::http_post;
  if (callee == "http_get") return Intrinsic::http_get;
  if (callee == "publish") return Intrinsic::publish;
  if (callee == "consume") return Intrinsic::consume;
  if (callee == "db.read") return Intrinsic::db_read;
  if (callee == "db.write") return Intrinsic::db_write;
  if (callee == "exec") return Intrinsic::exec;
  return Intrinsic::none;
}

std::string_view to_string(Intrinsic intrinsic) {
  switch (intrinsic) {
    case Intrinsic::none: return "";
    case Intrinsic::request_param: return "request.param";
    case Intrinsic::session_get: return "session.get";
    case Intrinsic::http_post: return "http_post";
    case Intrinsic::http_get: return "http_get";
    case Intrinsic::publish: return "publish";
    case Intrinsic::consume: return "consume";
    case Intrinsic::db_read: return "db.read";
    case Intrinsic::db_write: return "db.write";
    case Intrinsic::exec: return "exec";
  }
  return "";
}

std::string callee_text(const Expr& call) {
  if (call.kind != ExprKind::call || call.children.empty()) return {};
  std::string out;
  const Expr* e = &call.children.front();
  std::vector<std::string_view> parts;
  while (e->kind == ExprKind::member) {
    parts.push_back(e->text);
    e = &e->children.front();
  }
  if (e->kind != ExprKind::ident) return {};
  out = e->text;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    out.push_back('.');
    out.append(*it);
  }
  return out;
}

}  // namespace privflow::minisrv
