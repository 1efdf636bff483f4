#include "privflow/code_search.hpp"

#include <algorithm>
#include <deque>
#include <regex>

#include "privflow/error.hpp"

namespace privflow {

std::string_view to_string(NameMode mode) { return mode == NameMode::exact ? "exact" : "regex"; }
std::string_view to_string(CgDirection dir) { return dir == CgDirection::callers ? "callers" : "callees"; }

namespace {

bool is_request_param_site(const Element& e) {
  return e.kind == ElementKind::call && e.source.starts_with("request.param(");
}

void build_slot(const Service& s, detail::FlowSlot& slot) {
  const std::size_t n = s.size();

  // Enclosing function: walk contains edges down from every function.
  slot.owner.assign(n, npos_index);
  for (std::size_t f = 0; f < n; ++f) {
    if (s.at(f).kind != ElementKind::function) continue;
    std::vector<std::size_t> stack(s.out(EdgeKind::contains, f).begin(), s.out(EdgeKind::contains, f).end());
    while (!stack.empty()) {
      std::size_t x = stack.back();
      stack.pop_back();
      if (slot.owner[x] != npos_index || s.at(x).kind == ElementKind::function) continue;
      slot.owner[x] = f;
      for (std::size_t c : s.out(EdgeKind::contains, x)) stack.push_back(c);
    }
  }

  slot.callees.assign(n, {});
  slot.callers.assign(n, {});
  for (std::size_t x = 0; x < n; ++x) {
    const auto targets = s.out(EdgeKind::calls, x);
    if (targets.empty()) continue;
    std::vector<std::size_t> from;
    if (s.at(x).kind == ElementKind::function) {
      from.push_back(x);
    } else if (s.at(x).kind == ElementKind::decorator) {
      for (std::size_t f : s.out(EdgeKind::decorates, x)) {
        if (s.at(f).kind == ElementKind::function) from.push_back(f);
      }
    } else if (slot.owner[x] != npos_index) {
      from.push_back(slot.owner[x]);
    }
    for (std::size_t f : from) {
      for (std::size_t g : targets) {
        if (s.at(g).kind != ElementKind::function) continue;
        slot.callees[f].push_back(g);
        slot.callers[g].push_back(f);
      }
    }
  }
  for (auto* adj : {&slot.callees, &slot.callers}) {
    for (auto& v : *adj) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  FlowGraph& g = slot.graph;
  g.succ.assign(n, {});
  auto add = [&](std::size_t from, std::size_t to, FlowEdgeKind kind) { g.succ[from].push_back(FlowEdge{to, kind}); };
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y : s.out(EdgeKind::dataflow, x)) add(x, y, FlowEdgeKind::dataflow);
  }
  for (std::size_t x = 0; x < n; ++x) {
    const Element& e = s.at(x);
    if (e.kind == ElementKind::return_stmt && slot.owner[x] != npos_index) {
      for (std::size_t site : s.in(EdgeKind::calls, slot.owner[x])) {
        if (s.at(site).kind == ElementKind::call) add(x, site, FlowEdgeKind::return_value);
      }
    }
    if (e.kind == ElementKind::parameter) {
      for (std::size_t f : s.in(EdgeKind::contains, x)) {
        if (s.at(f).kind == ElementKind::function) add(x, f, FlowEdgeKind::parameter_of);
      }
    }
    if (e.kind == ElementKind::endpoint) {
      for (std::size_t f : s.out(EdgeKind::decorates, x)) {
        if (s.at(f).kind != ElementKind::function) continue;
        for (std::size_t p : s.out(EdgeKind::contains, f)) {
          if (s.at(p).kind == ElementKind::parameter) add(x, p, FlowEdgeKind::endpoint_input);
        }
        for (std::size_t y = 0; y < n; ++y) {
          if (slot.owner[y] == f && is_request_param_site(s.at(y))) add(x, y, FlowEdgeKind::endpoint_input);
        }
      }
    }
  }
  for (auto& v : g.succ) {
    std::stable_sort(v.begin(), v.end(), [](const FlowEdge& a, const FlowEdge& b) { return a.to < b.to; });
    v.erase(std::unique(v.begin(), v.end(), [](const FlowEdge& a, const FlowEdge& b) { return a.to == b.to; }),
            v.end());
  }
}

const detail::FlowSlot& slot_of(const Service& s) {
  detail::FlowSlot& slot = s.flow_slot();
  std::call_once(slot.once, [&] { build_slot(s, slot); });
  return slot;
}

std::vector<const Element*> pointers(const Service& s, const std::vector<std::size_t>& idx) {
  std::vector<const Element*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&s.at(i));
  return out;
}

const Element& require(const Service& s, std::string_view id) {
  const Element* e = s.find(id);
  if (e == nullptr) throw UnknownElement(std::string(id));
  return *e;
}

}  // namespace

std::vector<const Element*> q_name(const Service& service, std::string_view pattern, NameMode mode) {
  if (pattern.empty()) throw BadPattern("empty pattern");
  std::vector<const Element*> out;
  if (mode == NameMode::exact) {
    for (const auto& e : service.elements()) {
      if (!e.name.empty() && e.name == pattern) out.push_back(&e);
    }
    return out;
  }
  std::regex re;
  try {
    re = std::regex(std::string(pattern), std::regex::ECMAScript);
  } catch (const std::regex_error& err) {
    throw BadPattern("invalid regex '" + std::string(pattern) + "': " + err.what());
  }
  for (const auto& e : service.elements()) {
    if (!e.name.empty() && std::regex_match(e.name, re)) out.push_back(&e);
  }
  return out;
}

std::vector<const Element*> q_ast(const Service& service, ElementKind kind) {
  std::vector<const Element*> out;
  for (const auto& e : service.elements()) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

const FlowGraph& build_flow_graph(const Service& service) { return slot_of(service).graph; }

std::size_t enclosing_function(const Service& service, std::size_t index) { return slot_of(service).owner.at(index); }

std::vector<std::size_t> resolve_selector(const Service& service, std::string_view selector) {
  if (auto idx = service.index_of(selector)) return {*idx};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < service.size(); ++i) {
    if (!service.at(i).name.empty() && service.at(i).name == selector) out.push_back(i);
  }
  if (out.empty()) throw UnknownElement(std::string(selector));
  return out;
}

namespace {

void bfs_paths(const Service& s, const FlowGraph& g, std::size_t src, const std::vector<std::size_t>& dsts,
               std::vector<FlowPath>& out) {
  std::vector<std::size_t> parent(g.node_count(), npos_index);
  std::vector<FlowEdgeKind> via(g.node_count(), FlowEdgeKind::dataflow);
  std::vector<char> seen(g.node_count(), 0);
  std::deque<std::size_t> queue{src};
  seen[src] = 1;
  while (!queue.empty()) {
    std::size_t x = queue.front();
    queue.pop_front();
    for (const FlowEdge& e : g.succ[x]) {
      if (seen[e.to]) continue;
      seen[e.to] = 1;
      parent[e.to] = x;
      via[e.to] = e.kind;
      queue.push_back(e.to);
    }
  }
  for (std::size_t dst : dsts) {
    if (!seen[dst]) continue;
    FlowPath p;
    for (std::size_t x = dst; x != src; x = parent[x]) {
      p.nodes.push_back(s.at(x).id);
      p.hops.push_back(via[x]);
    }
    p.nodes.push_back(s.at(src).id);
    std::reverse(p.nodes.begin(), p.nodes.end());
    std::reverse(p.hops.begin(), p.hops.end());
    out.push_back(std::move(p));
  }
}

}  // namespace

std::vector<FlowPath> q_flow(const Service& service, std::string_view from, std::string_view to) {
  auto srcs = resolve_selector(service, from);
  auto dsts = resolve_selector(service, to);
  const FlowGraph& g = build_flow_graph(service);
  std::vector<FlowPath> out;
  for (std::size_t src : srcs) bfs_paths(service, g, src, dsts, out);
  return out;
}

std::vector<FlowPath> q_flow(const Service& service, std::size_t from, std::size_t to) {
  std::vector<FlowPath> out;
  bfs_paths(service, build_flow_graph(service), from, {to}, out);
  return out;
}

std::vector<const Element*> q_cg(const Service& service, std::string_view function, CgDirection direction,
                                 int depth) {
  if (depth < 1) throw Error("q_cg: depth must be positive");
  auto start = resolve_selector(service, function);
  std::erase_if(start, [&](std::size_t i) { return service.at(i).kind != ElementKind::function; });
  if (start.empty()) throw NotAFunction(std::string(function));

  const detail::FlowSlot& slot = slot_of(service);
  const auto& adj = direction == CgDirection::callees ? slot.callees : slot.callers;
  std::vector<char> reached(service.size(), 0);
  std::vector<std::size_t> frontier = start;
  for (int d = 0; d < depth && !frontier.empty(); ++d) {
    std::vector<std::size_t> next;
    for (std::size_t f : frontier) {
      for (std::size_t g : adj[f]) {
        if (reached[g]) continue;
        reached[g] = 1;
        next.push_back(g);
      }
    }
    frontier = std::move(next);
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < reached.size(); ++i) {
    if (reached[i]) idx.push_back(i);
  }
  return pointers(service, idx);
}

Location get_location(const Service& service, std::string_view id) { return require(service, id).location; }
std::string get_source(const Service& service, std::string_view id) { return require(service, id).source; }
std::string get_type(const Service& service, std::string_view id) { return require(service, id).inferred_type; }

}  // namespace privflow
