#include "privflow/cross_service.hpp"

#include <algorithm>
#include <future>
#include <optional>
#include <set>
#include <sstream>

#include "privflow/error.hpp"
#include "privflow/minisrv.hpp"
#include "privflow/reasoner.hpp"

namespace privflow {

using minisrv::ExprKind;
using minisrv::Intrinsic;

std::vector<const Element*> q_source(const Service& service) {
  std::vector<const Element*> out;
  for (const auto& e : service.elements()) {
    if (e.kind == ElementKind::endpoint) {
      out.push_back(&e);
    } else if (e.kind == ElementKind::call && minisrv::intrinsic_of(e.source.substr(0, e.source.find('('))) ==
                                                     Intrinsic::consume) {
      out.push_back(&e);
    }
  }
  return out;
}

std::vector<const Element*> q_user(const Program& program, Reasoner& reasoner) {
  const Service* entry = program.entry_service();
  if (entry == nullptr) throw NoEntryService();
  std::vector<const Element*> out;
  for (const Element* e : q_source(*entry)) {
    if (e->kind != ElementKind::endpoint) continue;
    ConfirmUserSource task{e->id, entry->name(), e->name, program.manifest.gateway_routes};
    auto verdict = std::get<UserSource>(reasoner.reason(task));
    if (verdict.confirmed) out.push_back(e);
  }
  return out;
}

namespace {

std::string callee_prefix(const Element& e) {
  auto open = e.source.find('(');
  std::string callee = e.source.substr(0, open);
  while (!callee.empty() && std::isspace(static_cast<unsigned char>(callee.back()))) callee.pop_back();
  return callee;
}

class Resolver {
 public:
  explicit Resolver(const Service& s) : s_(s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Element& e = s.at(i);
      if (e.kind == ElementKind::variable) {
        by_loc_[e.location].push_back(i);
        if (e.source.starts_with("const ")) consts_[e.name] = i;
      }
    }
  }

  /// String value of the first argument of a call element.
  std::optional<std::string> first_argument(const Element& call, std::string& why) {
    minisrv::Expr expr;
    try {
      expr = minisrv::parse_expression(call.source, call.location);
    } catch (const Error&) {
      why = "call source does not parse";
      return std::nullopt;
    }
    if (expr.kind != ExprKind::call || expr.children.size() < 2) {
      why = "call has no identifier argument";
      return std::nullopt;
    }
    return eval(expr.children[1], why, 0);
  }

 private:
  std::optional<std::string> eval(const minisrv::Expr& e, std::string& why, int depth) {
    if (depth > 32) {
      why = "identifier resolution too deep";
      return std::nullopt;
    }
    switch (e.kind) {
      case ExprKind::string_lit:
      case ExprKind::int_lit: return e.kind == ExprKind::string_lit ? e.text : std::to_string(e.int_value);
      case ExprKind::binary:
        if (e.op == minisrv::BinaryOp::add) {
          auto l = eval(e.children[0], why, depth + 1);
          if (!l) return std::nullopt;
          auto r = eval(e.children[1], why, depth + 1);
          if (!r) return std::nullopt;
          return *l + *r;
        }
        break;
      case ExprKind::ident: return eval_ident(e, why, depth);
      default: break;
    }
    why = "'" + minisrv::print(e) + "' is not a constant string";
    return std::nullopt;
  }

  std::optional<std::string> eval_const(std::size_t index, std::string& why, int depth) {
    const Element& c = s_.at(index);
    try {
      auto item = minisrv::parse_item(c.source, c.location);
      if (const auto* k = std::get_if<minisrv::Constant>(&item)) return eval(k->value, why, depth + 1);
    } catch (const Error&) {
    }
    why = "constant '" + c.name + "' does not parse";
    return std::nullopt;
  }

  std::optional<std::string> eval_ident(const minisrv::Expr& e, std::string& why, int depth) {
    std::optional<std::size_t> use;
    if (auto it = by_loc_.find(e.span.loc); it != by_loc_.end()) {
      for (std::size_t i : it->second) {
        if (s_.at(i).name == e.text) use = i;
      }
    }
    if (!use) {
      // Identifiers inside constant initializers have no use element.
      if (auto c = consts_.find(e.text); c != consts_.end()) return eval_const(c->second, why, depth);
      why = "no dataflow facts for '" + e.text + "'";
      return std::nullopt;
    }
    if (s_.at(*use).source.starts_with("const ")) return eval_const(*use, why, depth);
    auto defs = s_.in(EdgeKind::dataflow, *use);
    if (defs.empty()) {
      why = "'" + e.text + "' has no reaching definition";
      return std::nullopt;
    }
    std::optional<std::string> value;
    for (std::size_t d : defs) {
      auto v = eval_def(d, why, depth + 1);
      if (!v) return std::nullopt;
      if (value && *value != *v) {
        why = "'" + e.text + "' has conflicting definitions";
        return std::nullopt;
      }
      value = v;
    }
    return value;
  }

  std::optional<std::string> eval_def(std::size_t d, std::string& why, int depth) {
    const Element& def = s_.at(d);
    if (def.kind == ElementKind::variable && def.source.starts_with("const ")) return eval_const(d, why, depth);
    if (def.kind == ElementKind::variable) {
      for (std::size_t parent : s_.in(EdgeKind::contains, d)) {
        const Element& a = s_.at(parent);
        if (a.kind != ElementKind::assignment || a.location != def.location) continue;
        auto eq = a.source.find('=');
        if (eq == std::string::npos) break;
        try {
          auto rhs = minisrv::parse_expression(a.source.substr(eq + 1),
                                               minisrv::advance(a.location, a.source, eq + 1));
          return eval(rhs, why, depth + 1);
        } catch (const Error&) {
          break;
        }
      }
    }
    why = "'" + (def.name.empty() ? def.source : def.name) + "' is not derived from constants";
    return std::nullopt;
  }

  const Service& s_;
  std::map<Location, std::vector<std::size_t>> by_loc_;
  std::map<std::string, std::size_t> consts_;
};

}  // namespace

ChannelScan q_inter(const Service& service) {
  ChannelScan scan;
  Resolver resolver(service);
  for (const auto& e : service.elements()) {
    if (e.kind == ElementKind::endpoint) {
      scan.channels.push_back(Channel{e.id, ChannelDirection::in, ChannelProtocol::http, e.name});
      continue;
    }
    if (e.kind != ElementKind::call) continue;
    Intrinsic in = minisrv::intrinsic_of(callee_prefix(e));
    if (in != Intrinsic::http_post && in != Intrinsic::http_get && in != Intrinsic::publish &&
        in != Intrinsic::consume) {
      continue;
    }
    std::string why;
    auto id = resolver.first_argument(e, why);
    if (!id || id->empty()) {
      scan.unresolved.push_back(UnresolvedChannel{service.name(), e.id, id ? "empty identifier" : why});
      continue;
    }
    ChannelDirection dir = in == Intrinsic::consume ? ChannelDirection::in : ChannelDirection::out;
    ChannelProtocol proto =
        (in == Intrinsic::publish || in == Intrinsic::consume) ? ChannelProtocol::topic : ChannelProtocol::http;
    scan.channels.push_back(Channel{e.id, dir, proto, *id});
  }
  return scan;
}

ProgramChannels collect_channels(const Program& program) {
  ProgramChannels out;
  for (const auto& s : program.services) {
    ChannelScan scan = q_inter(s);
    std::set<ElementId> seen;
    for (const auto& c : scan.channels) seen.insert(c.element);
    auto& list = out.by_service[s.name()];
    list = std::move(scan.channels);
    for (const auto& c : s.supplied_channels()) {
      if (!seen.insert(c.element).second) {
        throw Error("service " + s.name() + ": channel on element " + c.element + " is both supplied and derived");
      }
      list.push_back(c);
    }
    std::sort(list.begin(), list.end(), [&](const Channel& a, const Channel& b) {
      auto ia = s.index_of(a.element).value_or(npos_index);
      auto ib = s.index_of(b.element).value_or(npos_index);
      return std::tie(ia, a.direction) < std::tie(ib, b.direction);
    });
    out.unresolved.insert(out.unresolved.end(), scan.unresolved.begin(), scan.unresolved.end());
  }
  return out;
}

std::string_view to_string(MatchRule rule) { return rule == MatchRule::exact ? "exact" : "wildcard"; }

std::string normalize_http_identifier(std::string_view id) {
  std::string s(id);
  if (auto scheme = s.find("://"); scheme != std::string::npos) {
    auto path = s.find('/', scheme + 3);
    s = path == std::string::npos ? "/" : s.substr(path);
  } else if (!s.empty() && s[0] != '/') {
    // host:port/path without a scheme
    auto slash = s.find('/');
    auto colon = s.find(':');
    if (colon != std::string::npos && (slash == std::string::npos || colon < slash)) {
      s = slash == std::string::npos ? "/" : s.substr(slash);
    }
  }
  if (auto q = s.find_first_of("?#"); q != std::string::npos) s.resize(q);
  if (s.empty() || s[0] != '/') s.insert(s.begin(), '/');
  return s;
}

namespace {

std::vector<std::string> segments(std::string_view path) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : path) {
    if (ch == '/') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_placeholder(std::string_view seg) {
  return (seg.size() > 2 && seg.front() == '{' && seg.back() == '}') || (seg.size() > 1 && seg.front() == ':');
}

}  // namespace

std::optional<MatchRule> match_identifier(ChannelProtocol protocol, std::string_view out_id, std::string_view in_id) {
  if (protocol == ChannelProtocol::topic) {
    return out_id == in_id ? std::optional(MatchRule::exact) : std::nullopt;
  }
  auto a = segments(normalize_http_identifier(out_id));
  auto b = segments(normalize_http_identifier(in_id));
  if (a.size() != b.size()) return std::nullopt;
  MatchRule rule = MatchRule::exact;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    if (!is_placeholder(b[i])) return std::nullopt;
    rule = MatchRule::wildcard;
  }
  return rule;
}

ChannelMatches match_channels(const ProgramChannels& channels) {
  ChannelMatches m;
  for (const auto& [from_service, outs] : channels.by_service) {
    for (const auto& out : outs) {
      if (out.direction != ChannelDirection::out) continue;
      std::size_t before = m.edges.size();
      std::set<std::string> targets;
      for (const auto& [to_service, ins] : channels.by_service) {
        for (const auto& in : ins) {
          if (in.direction != ChannelDirection::in || in.protocol != out.protocol) continue;
          if (auto rule = match_identifier(out.protocol, out.identifier, in.identifier)) {
            m.edges.push_back(ChannelEdge{from_service, out, to_service, in, *rule});
            targets.insert(to_service + ":" + in.identifier);
          }
        }
      }
      if (m.edges.size() - before > 1) {
        std::string list;
        for (const auto& t : targets) list += (list.empty() ? "" : ", ") + t;
        m.diagnostics.push_back("ambiguous channel '" + out.identifier + "' in " + from_service + " matches " + list);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> GlobalGraph::find(std::string_view id) const {
  auto it = index.find(std::string(id));
  if (it == index.end()) return std::nullopt;
  return it->second;
}

namespace {

struct FlowQuery {
  ElementId from;
  ElementId to;
  std::optional<FlowPath> witness;
};

std::vector<FlowQuery> phase_one(const Service& s, const std::vector<ElementId>& sources,
                                 const std::vector<ElementId>& dsts) {
  std::vector<FlowQuery> out;
  for (const auto& src : sources) {
    auto si = s.index_of(src);
    for (const auto& dst : dsts) {
      if (dst == src) continue;
      auto di = s.index_of(dst);
      FlowQuery q{src, dst, std::nullopt};
      if (si && di) {
        auto paths = q_flow(s, *si, *di);
        if (!paths.empty()) q.witness = std::move(paths.front());
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

}  // namespace

GlobalGraph build_global_graph(const Program& program, const GraphInputs& inputs, const FlowObserver& observer,
                               bool parallel) {
  std::set<ElementId> privops(inputs.privops.begin(), inputs.privops.end());
  std::set<ElementId> users(inputs.user_sources.begin(), inputs.user_sources.end());

  struct Plan {
    const Service* service;
    std::vector<ElementId> sources;
    std::vector<ElementId> dsts;
  };
  std::vector<Plan> plans;
  for (const auto& s : program.services) {
    Plan p{&s, {}, {}};
    std::set<ElementId> src_set;
    for (const Element* e : q_source(s)) src_set.insert(e->id);
    for (const auto& u : users) {
      if (s.find(u) != nullptr) src_set.insert(u);
    }
    std::set<std::size_t> dst_idx;
    for (const auto& e : s.elements()) {
      if (privops.contains(e.id)) dst_idx.insert(*s.index_of(e.id));
    }
    if (auto it = inputs.channels.by_service.find(s.name()); it != inputs.channels.by_service.end()) {
      for (const auto& c : it->second) {
        if (c.direction == ChannelDirection::out) {
          if (auto i = s.index_of(c.element)) dst_idx.insert(*i);
        }
      }
    }
    std::vector<std::size_t> src_idx;
    for (const auto& id : src_set) src_idx.push_back(s.index_of(id).value_or(npos_index));
    std::sort(src_idx.begin(), src_idx.end());
    for (std::size_t i : src_idx) {
      if (i != npos_index) p.sources.push_back(s.at(i).id);
    }
    for (std::size_t i : dst_idx) p.dsts.push_back(s.at(i).id);
    plans.push_back(std::move(p));
  }

  std::vector<std::vector<FlowQuery>> results(plans.size());
  if (parallel && plans.size() > 1) {
    std::vector<std::future<std::vector<FlowQuery>>> jobs;
    for (const auto& p : plans) {
      jobs.push_back(std::async(std::launch::async, [&p] { return phase_one(*p.service, p.sources, p.dsts); }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < plans.size(); ++i) results[i] = phase_one(*plans[i].service, plans[i].sources, plans[i].dsts);
  }

  GlobalGraph g;
  auto node = [&](const std::string& service, const ElementId& id) {
    auto [it, inserted] = g.index.emplace(id, g.nodes.size());
    if (inserted) g.nodes.push_back(GlobalNode{service, id});
    return it->second;
  };
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const std::string& svc = plans[i].service->name();
    for (const auto& id : plans[i].sources) node(svc, id);
    for (const auto& id : plans[i].dsts) node(svc, id);
    for (auto& q : results[i]) {
      if (observer) observer(svc, q.from, q.to, q.witness.has_value());
      if (!q.witness) continue;
      std::size_t a = node(svc, q.from);
      std::size_t b = node(svc, q.to);
      if (seen.emplace(a, b).second) g.edges.push_back(GlobalEdge{a, b, std::move(*q.witness)});
    }
  }
  for (const auto& ce : inputs.channel_edges) {
    std::size_t a = node(ce.from_service, ce.from.element);
    std::size_t b = node(ce.to_service, ce.to.element);
    if (seen.emplace(a, b).second) g.edges.push_back(GlobalEdge{a, b, ce});
  }
  g.out.assign(g.nodes.size(), {});
  for (std::size_t e = 0; e < g.edges.size(); ++e) g.out[g.edges[e].from].push_back(e);
  for (auto& list : g.out) {
    std::sort(list.begin(), list.end(), [&](std::size_t x, std::size_t y) {
      return g.nodes[g.edges[x].to].element < g.nodes[g.edges[y].to].element;
    });
  }
  return g;
}

std::string path_id(const std::vector<ElementId>& nodes) {
  std::string joined;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i) joined += '>';
    joined += nodes[i];
  }
  return hex64(fnv1a(joined));
}

GlobalFlows q_globalflow(const GlobalGraph& graph, const std::vector<ElementId>& sources,
                         const std::vector<ElementId>& sinks, std::size_t cap) {
  GlobalFlows flows;
  std::set<std::size_t> sink_set;
  for (const auto& s : sinks) {
    if (auto i = graph.find(s)) sink_set.insert(*i);
  }
  std::vector<ElementId> ordered(sources.begin(), sources.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  std::vector<char> on_path(graph.nodes.size(), 0);
  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;

  auto record = [&] {
    if (flows.paths.size() >= cap) {
      flows.truncated = true;
      return;
    }
    GlobalPath p;
    for (std::size_t n : nodes) p.nodes.push_back(graph.nodes[n].element);
    p.edges = edges;
    p.id = path_id(p.nodes);
    flows.paths.push_back(std::move(p));
  };

  std::function<void(std::size_t)> dfs = [&](std::size_t n) {
    if (flows.truncated) return;
    if (sink_set.contains(n)) record();
    for (std::size_t e : graph.out[n]) {
      std::size_t m = graph.edges[e].to;
      if (on_path[m]) continue;
      on_path[m] = 1;
      nodes.push_back(m);
      edges.push_back(e);
      dfs(m);
      nodes.pop_back();
      edges.pop_back();
      on_path[m] = 0;
      if (flows.truncated) return;
    }
  };
  for (const auto& s : ordered) {
    auto i = graph.find(s);
    if (!i) continue;
    on_path[*i] = 1;
    nodes.push_back(*i);
    dfs(*i);
    nodes.pop_back();
    on_path[*i] = 0;
  }
  return flows;
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    if (ch == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(ch);
  }
  return out;
}

}  // namespace

std::string to_dot(const GlobalGraph& graph, const Program& program) {
  std::ostringstream out;
  out << "digraph privflow {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n";
  std::map<std::string, std::vector<std::size_t>> by_service;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) by_service[graph.nodes[i].service].push_back(i);
  for (const auto& [svc, members] : by_service) {
    out << "  subgraph \"cluster_" << dot_escape(svc) << "\" {\n    label=\"" << dot_escape(svc) << "\";\n";
    for (std::size_t i : members) {
      ElementRef ref = program.find(graph.nodes[i].element);
      std::string label = graph.nodes[i].element;
      if (ref.element != nullptr) {
        std::string src = ref.element->source;
        if (src.size() > 60) src = src.substr(0, 57) + "...";
        label = std::string(to_string(ref.element->kind)) + " " + to_string(ref.element->location) + "\n" + src;
      }
      out << "    \"" << graph.nodes[i].element << "\" [label=\"" << dot_escape(label) << "\"];\n";
    }
    out << "  }\n";
  }
  for (const auto& e : graph.edges) {
    out << "  \"" << graph.nodes[e.from].element << "\" -> \"" << graph.nodes[e.to].element << "\"";
    if (const auto* ce = std::get_if<ChannelEdge>(&e.witness)) {
      out << " [style=dashed, label=\"" << dot_escape(ce->from.identifier) << "\"]";
    } else {
      out << " [label=\"" << std::get<FlowPath>(e.witness).hops.size() << " hops\"]";
    }
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace privflow
