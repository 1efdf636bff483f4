#include <algorithm>
#include <map>
#include <set>

#include "privflow/error.hpp"
#include "privflow/minisrv.hpp"

namespace privflow::minisrv {

namespace {

using IdSet = std::vector<ElementId>;  // sorted, unique

void merge_into(IdSet& dst, const IdSet& src) {
  IdSet out;
  std::set_union(dst.begin(), dst.end(), src.begin(), src.end(), std::back_inserter(out));
  dst = std::move(out);
}

struct Value {
  IdSet sources;
  std::string type{kTypeUnknown};
};

struct FunctionInfo {
  const Function* ast = nullptr;
  const Ast* file = nullptr;
  ElementId id;
  std::vector<ElementId> params;
};

struct ConstInfo {
  ElementId id;
  std::string type;
};

struct Env {
  std::map<std::string, IdSet> vars;
  bool terminated = false;
};

Env merge_envs(const Env& a, const Env& b) {
  if (a.terminated) return b;
  if (b.terminated) return a;
  Env out = a;
  for (const auto& [name, ids] : b.vars) merge_into(out.vars[name], ids);
  return out;
}

std::string literal_type(const Expr& e) {
  switch (e.kind) {
    case ExprKind::string_lit: return std::string(kTypeString);
    case ExprKind::int_lit: return std::string(kTypeInt);
    case ExprKind::bool_lit: return std::string(kTypeBool);
    default: return std::string(kTypeUnknown);
  }
}

std::string intrinsic_type(Intrinsic in) {
  switch (in) {
    case Intrinsic::request_param:
    case Intrinsic::session_get:
    case Intrinsic::consume: return std::string(kTypeString);
    case Intrinsic::db_read:
    case Intrinsic::http_get:
    case Intrinsic::http_post: return std::string(kTypeObject);
    default: return std::string(kTypeUnknown);
  }
}

/// Intrinsics that start a fresh value: their arguments (parameter or topic
/// names) do not flow into the result. The receiver still does.
bool is_fresh(Intrinsic in) {
  return in == Intrinsic::request_param || in == Intrinsic::session_get || in == Intrinsic::consume;
}

class Lowerer {
 public:
  explicit Lowerer(std::string service) : service_(std::move(service)) {}

  Service run(std::span<const Ast> files) {
    for (const auto& file : files) declare(file);
    for (const auto& file : files) {
      file_ = &file;
      for (const auto& item : file.items) {
        if (const auto* f = std::get_if<Function>(&item)) lower_function(*f);
      }
    }
    return Service(service_, std::move(elements_), std::move(edges_));
  }

 private:
  std::string source_of(const Span& span) const { return file_->text.substr(span.begin, span.end - span.begin); }

  ElementId id_for(ElementKind kind, const Location& loc) const { return make_element_id(service_, loc, kind); }

  ElementId add(ElementKind kind, std::string name, const Location& loc, std::string source, std::string type) {
    Element e;
    e.id = id_for(kind, loc);
    e.service = service_;
    e.kind = kind;
    e.name = std::move(name);
    e.location = loc;
    e.source = std::move(source);
    e.inferred_type = std::move(type);
    types_[e.id] = e.inferred_type;
    elements_.push_back(std::move(e));
    return elements_.back().id;
  }

  void edge(EdgeKind kind, const ElementId& from, const ElementId& to) { edges_.push_back(Edge{kind, from, to}); }

  void flow(const IdSet& from, const ElementId& to) {
    for (const auto& f : from) edge(EdgeKind::dataflow, f, to);
  }

  void declare(const Ast& file) {
    file_ = &file;
    for (const auto& item : file.items) {
      if (const auto* c = std::get_if<Constant>(&item)) {
        if (consts_.contains(c->name) || functions_.contains(c->name)) {
          throw LoweringError(to_string(c->span.loc) + ": duplicate definition of '" + c->name + "'");
        }
        std::string type = literal_type(c->value);
        ElementId var = add(ElementKind::variable, c->name, c->span.loc, source_of(c->span), type);
        ElementId lit = add(ElementKind::string_literal, "", c->value.span.loc, source_of(c->value.span), type);
        edge(EdgeKind::contains, var, lit);
        edge(EdgeKind::dataflow, lit, var);
        consts_[c->name] = ConstInfo{var, type};
        continue;
      }
      const auto& f = std::get<Function>(item);
      if (consts_.contains(f.name) || functions_.contains(f.name)) {
        throw LoweringError(to_string(f.span.loc) + ": duplicate definition of '" + f.name + "'");
      }
      FunctionInfo info;
      info.ast = &f;
      info.file = &file;
      info.id = add(ElementKind::function, f.name, f.span.loc, source_of(f.span), std::string(kTypeFunction));
      std::set<std::string> seen;
      for (const auto& p : f.params) {
        if (!seen.insert(p.name).second) {
          throw LoweringError(to_string(p.span.loc) + ": duplicate parameter '" + p.name + "'");
        }
        ElementId pid = add(ElementKind::parameter, p.name, p.span.loc, source_of(p.span), std::string(kTypeUnknown));
        edge(EdgeKind::contains, info.id, pid);
        info.params.push_back(pid);
      }
      functions_[f.name] = std::move(info);
    }
  }

  void lower_function(const Function& f) {
    const FunctionInfo& info = functions_.at(f.name);
    for (const auto& d : f.decorators) {
      std::string text = source_of(d.span);
      ElementId dec = add(ElementKind::decorator, d.name, d.span.loc, text, std::string(kTypeUnknown));
      edge(EdgeKind::decorates, dec, info.id);
      if (d.name == "route") {
        ElementId ep = add(ElementKind::endpoint, d.args[1].text, d.span.loc, text, std::string(kTypeObject));
        edge(EdgeKind::decorates, ep, info.id);
      } else {
        for (const auto& arg : d.args) {
          auto it = functions_.find(arg.text);
          if (it == functions_.end()) {
            throw LoweringError(to_string(arg.span.loc) + ": @auth references undefined check function '" +
                                arg.text + "'");
          }
          edge(EdgeKind::calls, dec, it->second.id);
        }
      }
    }
    Env env;
    for (std::size_t i = 0; i < f.params.size(); ++i) env.vars[f.params[i].name] = IdSet{info.params[i]};
    lower_block(f.body, info.id, env);
  }

  void lower_block(const std::vector<Stmt>& body, const ElementId& parent, Env& env) {
    for (const auto& s : body) lower_stmt(s, parent, env);
  }

  void lower_stmt(const Stmt& s, const ElementId& parent, Env& env) {
    std::vector<ElementId> produced;
    switch (s.kind) {
      case StmtKind::assign: {
        ElementId stmt = add(ElementKind::assignment, "", s.target_loc, source_of(s.span), std::string(kTypeUnknown));
        edge(EdgeKind::contains, parent, stmt);
        Value v = lower_expr(s.value[0], env, produced);
        ElementId def = add(ElementKind::variable, s.target, s.target_loc, s.target, v.type);
        produced.push_back(def);
        flow(v.sources, def);
        for (const auto& p : produced) edge(EdgeKind::contains, stmt, p);
        if (!env.terminated) env.vars[s.target] = IdSet{def};
        return;
      }
      case StmtKind::call: {
        const Expr& call = s.value[0];
        ElementId stmt = id_for(ElementKind::call, call.name_loc);
        edge(EdgeKind::contains, parent, stmt);
        lower_expr(call, env, produced);
        for (const auto& p : produced) {
          if (p != stmt) edge(EdgeKind::contains, stmt, p);
        }
        return;
      }
      case StmtKind::return_stmt: {
        ElementId stmt = add(ElementKind::return_stmt, "", s.span.loc, source_of(s.span), std::string(kTypeUnknown));
        edge(EdgeKind::contains, parent, stmt);
        if (!s.value.empty()) {
          Value v = lower_expr(s.value[0], env, produced);
          flow(v.sources, stmt);
          types_[stmt] = v.type;
        }
        for (const auto& p : produced) edge(EdgeKind::contains, stmt, p);
        env.terminated = true;
        return;
      }
      case StmtKind::if_stmt: {
        ElementId stmt = add(ElementKind::conditional, "", s.span.loc, source_of(s.span), std::string(kTypeUnknown));
        edge(EdgeKind::contains, parent, stmt);
        lower_expr(s.value[0], env, produced);
        for (const auto& p : produced) edge(EdgeKind::contains, stmt, p);
        Env then_env = env;
        Env else_env = env;
        lower_block(s.then_body, stmt, then_env);
        lower_block(s.else_body, stmt, else_env);
        bool was_terminated = env.terminated;
        env = merge_envs(then_env, else_env);
        env.terminated = was_terminated || (then_env.terminated && else_env.terminated);
        return;
      }
    }
  }

  Value lower_expr(const Expr& e, Env& env, std::vector<ElementId>& produced) {
    switch (e.kind) {
      case ExprKind::string_lit:
      case ExprKind::int_lit:
      case ExprKind::bool_lit: {
        ElementId lit = add(ElementKind::string_literal, "", e.span.loc, source_of(e.span), literal_type(e));
        produced.push_back(lit);
        return Value{IdSet{lit}, literal_type(e)};
      }
      case ExprKind::ident: return lower_use(e, env, produced);
      case ExprKind::member: {
        Value base = lower_expr(e.children[0], env, produced);
        ElementId fa = add(ElementKind::field_access, e.text, e.name_loc, source_of(e.span), std::string(kTypeUnknown));
        produced.push_back(fa);
        flow(base.sources, fa);
        return Value{IdSet{fa}, std::string(kTypeUnknown)};
      }
      case ExprKind::call: return lower_call(e, env, produced);
      case ExprKind::binary: {
        Value lhs = lower_expr(e.children[0], env, produced);
        Value rhs = lower_expr(e.children[1], env, produced);
        if (e.op != BinaryOp::add) return Value{{}, std::string(kTypeBool)};
        Value out;
        out.sources = lhs.sources;
        merge_into(out.sources, rhs.sources);
        if (lhs.type == kTypeString || rhs.type == kTypeString) {
          out.type = kTypeString;
        } else if (lhs.type == kTypeInt && rhs.type == kTypeInt) {
          out.type = kTypeInt;
        }
        return out;
      }
    }
    return {};
  }

  Value lower_use(const Expr& e, Env& env, std::vector<ElementId>& produced) {
    IdSet defs;
    if (auto it = env.vars.find(e.text); it != env.vars.end()) {
      defs = it->second;
    } else if (auto c = consts_.find(e.text); c != consts_.end()) {
      defs = IdSet{c->second.id};
    }
    std::string type;
    for (const auto& d : defs) {
      const std::string& t = types_[d];
      if (type.empty()) {
        type = t;
      } else if (type != t) {
        type = kTypeUnknown;
      }
    }
    if (type.empty()) type = kTypeUnknown;
    ElementId use = add(ElementKind::variable, e.text, e.span.loc, source_of(e.span), type);
    produced.push_back(use);
    flow(defs, use);
    return Value{IdSet{use}, type};
  }

  Value lower_call(const Expr& e, Env& env, std::vector<ElementId>& produced) {
    const Expr& callee = e.children[0];
    std::string spelled = callee_text(e);
    Intrinsic intrinsic = intrinsic_of(spelled);

    Value receiver;
    if (callee.kind == ExprKind::member) receiver = lower_expr(callee.children[0], env, produced);
    std::vector<Value> args;
    for (std::size_t i = 1; i < e.children.size(); ++i) args.push_back(lower_expr(e.children[i], env, produced));

    std::string type = intrinsic_type(intrinsic);
    const FunctionInfo* target = nullptr;
    if (callee.kind == ExprKind::ident && intrinsic == Intrinsic::none) {
      if (auto it = functions_.find(callee.text); it != functions_.end()) target = &it->second;
    }

    ElementId call = add(ElementKind::call, "", e.name_loc, source_of(e.span), type);
    produced.push_back(call);
    flow(receiver.sources, call);
    if (!is_fresh(intrinsic)) {
      for (const auto& a : args) flow(a.sources, call);
    }
    if (target != nullptr) {
      edge(EdgeKind::calls, call, target->id);
      for (std::size_t i = 0; i < args.size() && i < target->params.size(); ++i) flow(args[i].sources, target->params[i]);
    }
    return Value{IdSet{call}, type};
  }

  std::string service_;
  const Ast* file_ = nullptr;
  std::vector<Element> elements_;
  std::vector<Edge> edges_;
  std::map<std::string, FunctionInfo> functions_;
  std::map<std::string, ConstInfo> consts_;
  std::map<ElementId, std::string> types_;
};

}  // namespace

Service lower(std::span<const Ast> files, std::string_view service_name) {
  Lowerer l{std::string(service_name)};
  return l.run(files);
}

Service lower(const Ast& ast, std::string_view service_name) { return lower(std::span<const Ast>(&ast, 1), service_name); }

std::vector<std::string> unresolved_calls(const Service& service) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < service.size(); ++i) {
    const Element& e = service.at(i);
    if (e.kind != ElementKind::call || !service.out(EdgeKind::calls, i).empty()) continue;
    auto paren = e.source.find('(');
    if (paren == std::string::npos) continue;
    std::string callee = e.source.substr(0, paren);
    if (callee.find('.') != std::string::npos || intrinsic_of(callee) != Intrinsic::none) continue;
    out.push_back(to_string(e.location) + ": " + callee);
  }
  return out;
}

}  // namespace privflow::minisrv
