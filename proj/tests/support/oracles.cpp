#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <regex>
#include <stdexcept>

namespace oracle {

using namespace privflow;

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

struct Proto {
  ElementKind kind;
  std::string name;
  std::string source;
  long parent;  // contains parent, -1 for top level
};

}  // namespace

Service random_service(Rng& rng, const std::string& name, std::size_t max_elements, bool entry) {
  std::vector<Proto> ps;
  std::vector<std::pair<std::size_t, std::size_t>> calls, decorates, dataflow;
  const std::size_t limit = pick(rng, 5, max_elements);
  auto full = [&] { return ps.size() >= limit; };

  for (std::size_t k = pick(rng, 0, 2); k > 0 && !full(); --k) {
    std::string c = "C" + std::to_string(ps.size());
    ps.push_back({ElementKind::variable, c, "const " + c + " = \"v\"", -1});
  }
  std::vector<std::size_t> fns;
  for (std::size_t k = pick(rng, 1, 4); k > 0 && !full(); --k) {
    std::string f = "f" + std::to_string(fns.size());
    fns.push_back(ps.size());
    ps.push_back({ElementKind::function, f, "fn " + f + "() {}", -1});
  }

  static const std::vector<ElementKind> body_kinds = {
      ElementKind::variable,   ElementKind::call,        ElementKind::call,           ElementKind::assignment,
      ElementKind::return_stmt, ElementKind::conditional, ElementKind::field_access, ElementKind::string_literal,
      ElementKind::parameter};
  static const std::vector<std::string> intrinsic_calls = {"request.param(\"p\")", "consume(\"t1\")",
                                                           "http_post(u, b)", "db.write(x)", "log(x)"};
  for (std::size_t f : fns) {
    if (full()) break;
    if (coin(rng, 0.5)) {
      std::string path = "/r" + std::to_string(f);
      decorates.emplace_back(ps.size(), f);
      ps.push_back({ElementKind::endpoint, path, "@route(\"GET\", \"" + path + "\")", -1});
    }
    if (!full() && coin(rng, 0.3)) {
      std::size_t target = fns[pick(rng, 0, fns.size() - 1)];
      decorates.emplace_back(ps.size(), f);
      calls.emplace_back(ps.size(), target);
      ps.push_back({ElementKind::decorator, "auth", "@auth(" + ps[target].name + ")", -1});
    }
    std::vector<std::size_t> containers{f};
    for (std::size_t k = pick(rng, 0, 8); k > 0 && !full(); --k) {
      ElementKind kind = body_kinds[pick(rng, 0, body_kinds.size() - 1)];
      long parent = static_cast<long>(kind == ElementKind::parameter ? f : containers[pick(rng, 0, containers.size() - 1)]);
      std::size_t me = ps.size();
      std::string src = "x";
      std::string nm;
      if (kind == ElementKind::call) {
        if (coin(rng, 0.5)) {
          std::size_t target = fns[pick(rng, 0, fns.size() - 1)];
          src = ps[target].name + "(x)";
          calls.emplace_back(me, target);
        } else {
          src = intrinsic_calls[pick(rng, 0, intrinsic_calls.size() - 1)];
        }
      } else if (kind == ElementKind::variable || kind == ElementKind::parameter) {
        nm = "v" + std::to_string(me);
        src = nm;
      } else if (kind == ElementKind::return_stmt) {
        src = "return x";
      }
      ps.push_back({kind, nm, src, parent});
      if (kind == ElementKind::conditional || kind == ElementKind::assignment) containers.push_back(me);
    }
  }

  std::vector<std::size_t> flowable;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].kind != ElementKind::function) flowable.push_back(i);
  }
  if (flowable.size() >= 2) {
    for (std::size_t k = pick(rng, 0, 2 * ps.size()); k > 0; --k) {
      std::size_t a = flowable[pick(rng, 0, flowable.size() - 1)];
      std::size_t b = flowable[pick(rng, 0, flowable.size() - 1)];
      if (a != b) dataflow.emplace_back(a, b);
    }
  }

  std::vector<Element> elements;
  const std::string file = name + ".msv";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Element e;
    e.service = name;
    e.kind = ps[i].kind;
    e.name = ps[i].name;
    e.location = Location{file, static_cast<int>(i) + 1, 1};
    e.id = make_element_id(name, e.location, e.kind);
    e.source = ps[i].source;
    elements.push_back(std::move(e));
  }
  std::vector<Edge> edges;
  auto add = [&](EdgeKind k, std::size_t a, std::size_t b) { edges.push_back(Edge{k, elements[a].id, elements[b].id}); };
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].parent >= 0) add(EdgeKind::contains, static_cast<std::size_t>(ps[i].parent), i);
  }
  for (auto [a, b] : calls) add(EdgeKind::calls, a, b);
  for (auto [a, b] : decorates) add(EdgeKind::decorates, a, b);
  for (auto [a, b] : dataflow) add(EdgeKind::dataflow, a, b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Service(name, std::move(elements), std::move(edges), {}, entry);
}

namespace {

struct Facts {
  const Service& s;
  std::map<std::string, std::size_t> idx;
  std::vector<long> parent;
  std::vector<std::pair<std::size_t, std::size_t>> by_kind[kEdgeKindCount];

  explicit Facts(const Service& svc) : s(svc), parent(svc.size(), -1) {
    for (std::size_t i = 0; i < s.size(); ++i) idx[s.at(i).id] = i;
    for (const Edge& e : s.edges()) {
      auto a = idx.find(e.from);
      auto b = idx.find(e.to);
      if (a == idx.end() || b == idx.end()) continue;
      by_kind[static_cast<std::size_t>(e.kind)].emplace_back(a->second, b->second);
      if (e.kind == EdgeKind::contains) parent[b->second] = static_cast<long>(a->second);
    }
  }

  const std::vector<std::pair<std::size_t, std::size_t>>& edges(EdgeKind k) const {
    return by_kind[static_cast<std::size_t>(k)];
  }

  long owner(std::size_t x) const {
    for (long y = parent[x]; y >= 0; y = parent[static_cast<std::size_t>(y)]) {
      if (s.at(static_cast<std::size_t>(y)).kind == ElementKind::function) return y;
    }
    return -1;
  }
};

}  // namespace

std::vector<std::vector<std::size_t>> flow_edges(const Service& s) {
  Facts f(s);
  const std::size_t n = s.size();
  std::vector<std::set<std::size_t>> adj(n);
  for (auto [a, b] : f.edges(EdgeKind::dataflow)) adj[a].insert(b);
  for (std::size_t x = 0; x < n; ++x) {
    const Element& e = s.at(x);
    if (e.kind == ElementKind::return_stmt) {
      long fn = f.owner(x);
      for (auto [c, g] : f.edges(EdgeKind::calls)) {
        if (fn >= 0 && g == static_cast<std::size_t>(fn) && s.at(c).kind == ElementKind::call) adj[x].insert(c);
      }
    }
    if (e.kind == ElementKind::parameter && f.parent[x] >= 0 &&
        s.at(static_cast<std::size_t>(f.parent[x])).kind == ElementKind::function) {
      adj[x].insert(static_cast<std::size_t>(f.parent[x]));
    }
  }
  for (auto [ep, fn] : f.edges(EdgeKind::decorates)) {
    if (s.at(ep).kind != ElementKind::endpoint || s.at(fn).kind != ElementKind::function) continue;
    for (std::size_t y = 0; y < n; ++y) {
      const Element& e = s.at(y);
      if (e.kind == ElementKind::parameter && f.parent[y] == static_cast<long>(fn)) adj[ep].insert(y);
      if (e.kind == ElementKind::call && f.owner(y) == static_cast<long>(fn) && e.source.rfind("request.param(", 0) == 0) {
        adj[ep].insert(y);
      }
    }
  }
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(adj[i].begin(), adj[i].end());
  return out;
}

std::vector<std::vector<char>> closure(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<char>> r(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    r[i][i] = 1;
    for (std::size_t j : adj[i]) r[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!r[i][k]) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (r[k][j]) r[i][j] = 1;
      }
    }
  }
  return r;
}

std::vector<std::vector<int>> distances(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<int>> d(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> q{s};
    d[s][s] = 0;
    while (!q.empty()) {
      std::size_t x = q.front();
      q.pop_front();
      for (std::size_t y : adj[x]) {
        if (d[s][y] >= 0) continue;
        d[s][y] = d[s][x] + 1;
        q.push_back(y);
      }
    }
  }
  return d;
}

std::vector<std::set<std::size_t>> call_relation(const Service& s) {
  Facts f(s);
  std::vector<std::set<std::size_t>> rel(s.size());
  for (auto [x, g] : f.edges(EdgeKind::calls)) {
    if (s.at(g).kind != ElementKind::function) continue;
    const Element& e = s.at(x);
    if (e.kind == ElementKind::function) {
      rel[x].insert(g);
    } else if (e.kind == ElementKind::decorator) {
      for (auto [d, fn] : f.edges(EdgeKind::decorates)) {
        if (d == x && s.at(fn).kind == ElementKind::function) rel[fn].insert(g);
      }
    } else if (long o = f.owner(x); o >= 0) {
      rel[static_cast<std::size_t>(o)].insert(g);
    }
  }
  return rel;
}

std::set<std::size_t> cg_reach(const std::vector<std::set<std::size_t>>& rel, std::size_t start, int depth) {
  std::set<std::size_t> seen;
  std::set<std::size_t> frontier{start};
  for (int d = 0; d < depth; ++d) {
    std::set<std::size_t> next;
    for (std::size_t f : frontier) {
      for (std::size_t g : rel[f]) {
        if (seen.insert(g).second) next.insert(g);
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

// ---------------------------------------------------------------------------

RandomProgram random_program(Rng& rng) {
  static const std::vector<std::string> in_pool = {"/a", "/b/{id}", "/b/{id}/x", "/c/:k", "/d/e"};
  static const std::vector<std::string> out_pool = {"http://h:1/a", "/a?q=1",  "/b/7",   "svc:8080/b/9/x",
                                                    "/c/z#frag",    "/d/e",    "/d",     "https://x.y/b/{id}"};
  static const std::vector<std::string> topics = {"t1", "t2"};
  RandomProgram rp;
  const std::size_t ns = pick(rng, 2, 4);
  for (std::size_t i = 0; i < ns; ++i) {
    std::string name = "s" + std::to_string(i);
    rp.program.services.push_back(random_service(rng, name, 20, i == 0));
    rp.program.manifest.services.push_back(ManifestService{name, i == 0, "", {}, {}});
  }
  for (const auto& s : rp.program.services) {
    auto& chans = rp.inputs.channels.by_service[s.name()];
    for (const auto& e : s.elements()) {
      if (e.kind == ElementKind::endpoint) {
        if (coin(rng, 0.7)) {
          chans.push_back(Channel{e.id, ChannelDirection::in, ChannelProtocol::http, in_pool[pick(rng, 0, in_pool.size() - 1)]});
        }
        if (s.entry() && coin(rng, 0.7)) rp.inputs.user_sources.push_back(e.id);
      } else if (e.kind == ElementKind::call) {
        if (e.source.rfind("consume(", 0) == 0) {
          chans.push_back(Channel{e.id, ChannelDirection::in, ChannelProtocol::topic, topics[pick(rng, 0, 1)]});
        } else if (coin(rng, 0.4)) {
          if (coin(rng, 0.75)) {
            chans.push_back(Channel{e.id, ChannelDirection::out, ChannelProtocol::http, out_pool[pick(rng, 0, out_pool.size() - 1)]});
          } else {
            chans.push_back(Channel{e.id, ChannelDirection::out, ChannelProtocol::topic, topics[pick(rng, 0, 1)]});
          }
        } else if (coin(rng, 0.4)) {
          rp.inputs.privops.push_back(e.id);
        }
      }
    }
  }
  return rp;
}

namespace {

std::vector<std::string> path_segments(std::string id) {
  static const std::regex scheme_host(R"(^[A-Za-z][A-Za-z0-9+.-]*://[^/]*)");
  static const std::regex host_port(R"(^[^/:]+:[0-9]+)");
  id = std::regex_replace(id, scheme_host, "");
  id = std::regex_replace(id, host_port, "");
  id = id.substr(0, id.find_first_of("?#"));
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= id.size()) {
    std::size_t next = id.find('/', pos);
    if (next == std::string::npos) next = id.size();
    if (next > pos) out.push_back(id.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

}  // namespace

bool naive_http_match(const std::string& out, const std::string& in) {
  static const std::regex placeholder(R"(^(\{.+\}|:.+)$)");
  auto a = path_segments(out);
  auto b = path_segments(in);
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && !std::regex_match(b[i], placeholder)) return false;
  }
  return true;
}

std::set<std::pair<std::string, std::string>> naive_channel_matches(const ProgramChannels& channels) {
  std::vector<Channel> all;
  for (const auto& [svc, list] : channels.by_service) all.insert(all.end(), list.begin(), list.end());
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& o : all) {
    for (const auto& i : all) {
      if (o.direction != ChannelDirection::out || i.direction != ChannelDirection::in) continue;
      if (o.protocol != i.protocol) continue;
      bool ok = o.protocol == ChannelProtocol::topic ? o.identifier == i.identifier
                                                     : naive_http_match(o.identifier, i.identifier);
      if (ok) out.emplace(o.element, i.element);
    }
  }
  return out;
}

std::set<std::pair<std::string, std::string>> naive_global_edges(const Program& program, const GraphInputs& inputs) {
  std::set<std::pair<std::string, std::string>> edges;
  std::set<std::string> privops(inputs.privops.begin(), inputs.privops.end());
  std::set<std::string> users(inputs.user_sources.begin(), inputs.user_sources.end());
  std::set<std::string> outs;
  for (const auto& [svc, list] : inputs.channels.by_service) {
    for (const auto& c : list) {
      if (c.direction == ChannelDirection::out) outs.insert(c.element);
    }
  }
  for (const auto& s : program.services) {
    auto reach = closure(flow_edges(s));
    std::vector<std::size_t> srcs, dsts;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Element& e = s.at(i);
      bool consume = e.kind == ElementKind::call && e.source.rfind("consume(", 0) == 0;
      if (e.kind == ElementKind::endpoint || consume || users.contains(e.id)) srcs.push_back(i);
      if (privops.contains(e.id) || outs.contains(e.id)) dsts.push_back(i);
    }
    for (std::size_t a : srcs) {
      for (std::size_t b : dsts) {
        if (a != b && reach[a][b]) edges.emplace(s.at(a).id, s.at(b).id);
      }
    }
  }
  for (const auto& e : naive_channel_matches(inputs.channels)) edges.insert(e);
  return edges;
}

std::set<std::string> reachable(const std::set<std::pair<std::string, std::string>>& edges, const std::string& from) {
  std::set<std::string> seen{from};
  std::deque<std::string> q{from};
  while (!q.empty()) {
    std::string x = q.front();
    q.pop_front();
    for (auto it = edges.lower_bound({x, ""}); it != edges.end() && it->first == x; ++it) {
      if (seen.insert(it->second).second) q.push_back(it->second);
    }
  }
  return seen;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kInts = {"i0", "i1"};
const std::vector<std::string> kStrs = {"s0", "s1"};
const std::vector<std::string> kLits = {"a", "b", "c"};

Formula random_atom(Rng& rng) {
  static const std::vector<CmpOp> ops = {CmpOp::eq, CmpOp::ne, CmpOp::lt, CmpOp::le, CmpOp::gt, CmpOp::ge};
  auto eq_ne = [&] { return coin(rng, 0.5) ? CmpOp::eq : CmpOp::ne; };
  switch (pick(rng, 0, 5)) {
    case 0: {
      Term v = Term::var(kInts[pick(rng, 0, 1)]);
      Term k = Term::integer(static_cast<std::int64_t>(pick(rng, 0, 8)) - 4);
      CmpOp op = ops[pick(rng, 0, ops.size() - 1)];
      return coin(rng, 0.5) ? Formula::compare(v, op, k) : Formula::compare(k, op, v);
    }
    case 1: return Formula::compare(Term::var("i0"), eq_ne(), Term::var("i1"));
    case 2: {
      Term v = Term::var(kStrs[pick(rng, 0, 1)]);
      Term k = Term::string(kLits[pick(rng, 0, kLits.size() - 1)]);
      return coin(rng, 0.5) ? Formula::compare(v, eq_ne(), k) : Formula::compare(k, eq_ne(), v);
    }
    case 3: return Formula::compare(Term::var("s0"), eq_ne(), Term::var("s1"));
    case 4: return Formula::boolean("b0");
    default: return Formula::truth(coin(rng, 0.5));
  }
}

Formula random_formula(Rng& rng, int depth) {
  if (depth == 0 || coin(rng, 0.3)) return random_atom(rng);
  switch (pick(rng, 0, 2)) {
    case 0: return Formula::negation(random_formula(rng, depth - 1));
    case 1: {
      std::vector<Formula> kids;
      for (std::size_t k = pick(rng, 2, 3); k > 0; --k) kids.push_back(random_formula(rng, depth - 1));
      return Formula::conj(std::move(kids));
    }
    default: {
      std::vector<Formula> kids;
      for (std::size_t k = pick(rng, 2, 3); k > 0; --k) kids.push_back(random_formula(rng, depth - 1));
      return Formula::disj(std::move(kids));
    }
  }
}

Value term_value(const Term& t, const Assignment& a) {
  switch (t.kind) {
    case Term::Kind::var: return a.at(t.name);
    case Term::Kind::int_lit: return t.int_value;
    case Term::Kind::str_lit: return t.str_value;
  }
  throw std::logic_error("term kind");
}

template <class T>
bool compare(const T& l, CmpOp op, const T& r) {
  switch (op) {
    case CmpOp::eq: return l == r;
    case CmpOp::ne: return l != r;
    case CmpOp::lt: return l < r;
    case CmpOp::le: return l <= r;
    case CmpOp::gt: return l > r;
    case CmpOp::ge: return l >= r;
  }
  return false;
}

void collect_literals(const Formula& f, std::set<std::string>& out) {
  if (f.kind == Formula::Kind::cmp) {
    if (f.lhs.kind == Term::Kind::str_lit) out.insert(f.lhs.str_value);
    if (f.rhs.kind == Term::Kind::str_lit) out.insert(f.rhs.str_value);
  }
  for (const auto& c : f.children) collect_literals(c, out);
}

}  // namespace

PathConstraint random_constraint(Rng& rng) {
  PathConstraint c;
  for (const auto& v : kInts) c.variables.push_back(Variable{v, VarType::int_});
  for (const auto& v : kStrs) c.variables.push_back(Variable{v, VarType::string});
  c.variables.push_back(Variable{"b0", VarType::bool_});
  c.formula = random_formula(rng, 3);
  return c;
}

bool evaluate(const Formula& f, const Assignment& a) {
  switch (f.kind) {
    case Formula::Kind::true_: return true;
    case Formula::Kind::false_: return false;
    case Formula::Kind::bool_var: return std::get<bool>(a.at(f.var));
    case Formula::Kind::not_: return !evaluate(f.children.at(0), a);
    case Formula::Kind::and_:
      return std::all_of(f.children.begin(), f.children.end(), [&](const Formula& c) { return evaluate(c, a); });
    case Formula::Kind::or_:
      return std::any_of(f.children.begin(), f.children.end(), [&](const Formula& c) { return evaluate(c, a); });
    case Formula::Kind::cmp: break;
  }
  Value l = term_value(f.lhs, a);
  Value r = term_value(f.rhs, a);
  if (l.index() != r.index()) throw std::logic_error("ill-typed comparison");
  if (auto* li = std::get_if<std::int64_t>(&l)) return compare(*li, f.op, std::get<std::int64_t>(r));
  if (auto* ls = std::get_if<std::string>(&l)) {
    if (f.op != CmpOp::eq && f.op != CmpOp::ne) throw std::logic_error("string ordering");
    return compare(*ls, f.op, std::get<std::string>(r));
  }
  return compare(std::get<bool>(l), f.op, std::get<bool>(r));
}

std::optional<Assignment> enumerate_model(const PathConstraint& c) {
  std::set<std::string> lits;
  collect_literals(c.formula, lits);
  std::vector<std::vector<Value>> domains;
  std::size_t fresh = 0;
  for (const auto& v : c.variables) {
    std::vector<Value> d;
    switch (v.type) {
      case VarType::int_:
        for (std::int64_t i = -8; i <= 8; ++i) d.emplace_back(i);
        break;
      case VarType::string:
        for (const auto& l : lits) d.emplace_back(l);
        d.emplace_back("#fresh" + std::to_string(fresh++));
        break;
      case VarType::bool_:
        d.emplace_back(false);
        d.emplace_back(true);
        break;
    }
    domains.push_back(std::move(d));
  }
  // All fresh values are visible to every string variable so that two
  // variables can take distinct unnamed values.
  for (std::size_t i = 0; i < c.variables.size(); ++i) {
    if (c.variables[i].type != VarType::string) continue;
    for (std::size_t k = 0; k < fresh; ++k) {
      Value extra = std::string("#fresh" + std::to_string(k));
      if (std::find(domains[i].begin(), domains[i].end(), extra) == domains[i].end()) domains[i].push_back(extra);
    }
  }
  Assignment a;
  std::function<bool(std::size_t)> go = [&](std::size_t i) -> bool {
    if (i == c.variables.size()) return evaluate(c.formula, a);
    for (const auto& v : domains[i]) {
      a[c.variables[i].name] = v;
      if (go(i + 1)) return true;
    }
    return false;
  };
  if (go(0)) return a;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

struct Sexp {
  enum class Kind { list, symbol, numeral, string } kind = Kind::list;
  std::string text;
  std::vector<Sexp> items;
};

class SexpReader {
 public:
  explicit SexpReader(const std::string& t) : t_(t) {}

  std::vector<Sexp> all() {
    std::vector<Sexp> out;
    skip();
    while (pos_ < t_.size()) {
      out.push_back(read());
      skip();
    }
    return out;
  }

 private:
  void skip() {
    while (pos_ < t_.size()) {
      if (std::isspace(static_cast<unsigned char>(t_[pos_]))) {
        ++pos_;
      } else if (t_[pos_] == ';') {
        while (pos_ < t_.size() && t_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Sexp read() {
    skip();
    if (pos_ >= t_.size()) throw std::runtime_error("unexpected end of input");
    char ch = t_[pos_];
    if (ch == ')') throw std::runtime_error("unbalanced ')' at offset " + std::to_string(pos_));
    if (ch == '(') {
      ++pos_;
      Sexp list;
      for (;;) {
        skip();
        if (pos_ >= t_.size()) throw std::runtime_error("unclosed '('");
        if (t_[pos_] == ')') {
          ++pos_;
          return list;
        }
        list.items.push_back(read());
      }
    }
    if (ch == '"') {
      Sexp s{Sexp::Kind::string, "", {}};
      ++pos_;
      for (;;) {
        if (pos_ >= t_.size()) throw std::runtime_error("unterminated string literal");
        char c = t_[pos_++];
        if (c == '"') {
          if (pos_ < t_.size() && t_[pos_] == '"') {
            s.text.push_back('"');
            ++pos_;
            continue;
          }
          return s;
        }
        if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f) {
          throw std::runtime_error("non-printable character in string literal");
        }
        s.text.push_back(c);
      }
    }
    if (ch == '|') {
      std::size_t end = t_.find('|', pos_ + 1);
      if (end == std::string::npos) throw std::runtime_error("unterminated quoted symbol");
      std::string body = t_.substr(pos_ + 1, end - pos_ - 1);
      if (body.find('\\') != std::string::npos) throw std::runtime_error("backslash in quoted symbol");
      pos_ = end + 1;
      return Sexp{Sexp::Kind::symbol, body, {}};
    }
    std::size_t start = pos_;
    while (pos_ < t_.size() && !std::isspace(static_cast<unsigned char>(t_[pos_])) && t_[pos_] != '(' &&
           t_[pos_] != ')' && t_[pos_] != '"' && t_[pos_] != '|' && t_[pos_] != ';') {
      ++pos_;
    }
    std::string tok = t_.substr(start, pos_ - start);
    static const std::regex numeral("0|[1-9][0-9]*");
    static const std::regex symbol(R"([A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*)");
    if (std::regex_match(tok, numeral)) return Sexp{Sexp::Kind::numeral, tok, {}};
    if (std::regex_match(tok, symbol)) return Sexp{Sexp::Kind::symbol, tok, {}};
    throw std::runtime_error("bad token '" + tok + "'");
  }

  const std::string& t_;
  std::size_t pos_ = 0;
};

using Sorts = std::map<std::string, std::string>;

std::string sort_of(const Sexp& e, const Sorts& decl) {
  switch (e.kind) {
    case Sexp::Kind::numeral: return "Int";
    case Sexp::Kind::string: return "String";
    case Sexp::Kind::symbol: {
      if (e.text == "true" || e.text == "false") return "Bool";
      auto it = decl.find(e.text);
      if (it == decl.end()) throw std::runtime_error("undeclared symbol '" + e.text + "'");
      return it->second;
    }
    case Sexp::Kind::list: break;
  }
  if (e.items.empty() || e.items[0].kind != Sexp::Kind::symbol) throw std::runtime_error("application without operator");
  const std::string& op = e.items[0].text;
  std::vector<std::string> args;
  for (std::size_t i = 1; i < e.items.size(); ++i) args.push_back(sort_of(e.items[i], decl));
  auto all = [&](const std::string& s) { return std::all_of(args.begin(), args.end(), [&](auto& a) { return a == s; }); };
  if (op == "not") {
    if (args.size() != 1 || !all("Bool")) throw std::runtime_error("bad not");
    return "Bool";
  }
  if (op == "and" || op == "or" || op == "=>") {
    if (args.empty() || !all("Bool")) throw std::runtime_error("bad " + op);
    return "Bool";
  }
  if (op == "=" || op == "distinct") {
    if (args.size() < 2 || !all(args[0])) throw std::runtime_error("bad " + op + " (mixed sorts)");
    return "Bool";
  }
  if (op == "<" || op == "<=" || op == ">" || op == ">=") {
    if (args.size() != 2 || !all("Int")) throw std::runtime_error("bad " + op);
    return "Bool";
  }
  if (op == "-" || op == "+") {
    if (args.empty() || !all("Int") || (op == "+" && args.size() < 2)) throw std::runtime_error("bad " + op);
    return "Int";
  }
  throw std::runtime_error("unknown operator '" + op + "'");
}

}  // namespace

std::string smtlib_problem(const std::string& text) {
  try {
    auto cmds = SexpReader(text).all();
    if (cmds.empty()) return "empty script";
    Sorts decl;
    bool checked = false;
    for (const auto& c : cmds) {
      if (checked) return "command after check-sat";
      if (c.kind != Sexp::Kind::list || c.items.empty() || c.items[0].kind != Sexp::Kind::symbol) {
        return "top-level item is not a command";
      }
      const std::string& head = c.items[0].text;
      if (head == "declare-const") {
        if (c.items.size() != 3 || c.items[1].kind != Sexp::Kind::symbol || c.items[2].kind != Sexp::Kind::symbol) {
          return "malformed declare-const";
        }
        const std::string& sort = c.items[2].text;
        if (sort != "Int" && sort != "String" && sort != "Bool") return "unknown sort " + sort;
        if (!decl.emplace(c.items[1].text, sort).second) return "redeclared " + c.items[1].text;
      } else if (head == "assert") {
        if (c.items.size() != 2) return "assert takes one term";
        if (sort_of(c.items[1], decl) != "Bool") return "assert of non-Bool term";
      } else if (head == "check-sat") {
        if (c.items.size() != 1) return "check-sat takes no arguments";
        checked = true;
      } else {
        return "unknown command " + head;
      }
    }
    if (!checked) return "missing check-sat";
    return "";
  } catch (const std::exception& e) {
    return e.what();
  }
}

}  // namespace oracle
