#include "privflow/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "privflow/minisrv.hpp"

namespace privflow {

CheckVocabulary CheckVocabulary::from(const OracleRules& rules) {
  return CheckVocabulary{rules.check_name_patterns, rules.ownership_patterns};
}

std::string_view to_string(Attachment a) {
  switch (a) {
    case Attachment::decorator: return "decorator";
    case Attachment::middleware: return "middleware";
    case Attachment::inline_: return "inline";
  }
  return "inline";
}

std::string_view to_string(Feasibility f) { return f == Feasibility::feasible ? "feasible" : "unknown"; }

// ---------------------------------------------------------------------------
// Session

AnalysisSession::AnalysisSession(const Program& program, Reasoner& reasoner, ScanBudget budget)
    : program_(program), reasoner_(reasoner), budget_(budget), start_(std::chrono::steady_clock::now()) {
  for (const char* p : {kPhaseIdentify, kPhaseFlows, kPhaseValidate}) usage_.calls[p] = 0;
}

void AnalysisSession::check_clock() {
  if (std::chrono::steady_clock::now() - start_ > budget_.wall_clock) {
    mark_exhausted("wall-clock limit reached");
    throw BudgetExhausted("wall-clock limit reached");
  }
}

void AnalysisSession::mark_exhausted(const std::string& why) {
  if (!usage_.exhausted) usage_.reason = why;
  usage_.exhausted = true;
}

void AnalysisSession::count(const char* phase) {
  check_clock();
  std::size_t& used = usage_.calls[phase];
  if (used >= budget_.max_calls_per_phase) {
    std::string why = std::string(phase) + " phase used its " + std::to_string(budget_.max_calls_per_phase) +
                      " tool calls";
    mark_exhausted(why);
    throw BudgetExhausted(why);
  }
  ++used;
}

TraceEvent& AnalysisSession::log(const char* phase, std::string tool,
                                 std::vector<std::pair<std::string, std::string>> args, std::size_t results,
                                 bool counted) {
  TraceEvent ev;
  ev.seq = trace_.size() + 1;
  ev.phase = phase;
  ev.tool = std::move(tool);
  ev.arguments = std::move(args);
  ev.results = results;
  ev.counted = counted;
  ev.elapsed_us =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start_).count();
  trace_.push_back(std::move(ev));
  return trace_.back();
}

std::vector<const Element*> AnalysisSession::q_name(const char* phase, const Service& s, const std::string& pattern,
                                                    NameMode mode) {
  count(phase);
  auto out = privflow::q_name(s, pattern, mode);
  log(phase, "q_name", {{"service", s.name()}, {"pattern", pattern}, {"mode", std::string(to_string(mode))}},
      out.size(), true);
  return out;
}

std::vector<const Element*> AnalysisSession::q_ast(const char* phase, const Service& s, ElementKind kind) {
  count(phase);
  auto out = privflow::q_ast(s, kind);
  log(phase, "q_ast", {{"service", s.name()}, {"kind", std::string(to_string(kind))}}, out.size(), true);
  return out;
}

std::vector<const Element*> AnalysisSession::q_cg(const char* phase, const Service& s, const ElementId& function,
                                                  CgDirection direction, int depth) {
  std::string key = s.name() + "|" + function + "|" + std::string(to_string(direction)) + "|" + std::to_string(depth);
  if (auto it = cg_cache_.find(key); it != cg_cache_.end()) return it->second;
  count(phase);
  auto out = privflow::q_cg(s, function, direction, depth);
  log(phase, "q_cg",
      {{"service", s.name()},
       {"function", function},
       {"direction", std::string(to_string(direction))},
       {"depth", std::to_string(depth)}},
      out.size(), true);
  cg_cache_[key] = out;
  return out;
}

std::string AnalysisSession::get_source(const char* phase, const Service& s, const ElementId& id) {
  auto out = privflow::get_source(s, id);
  log(phase, "get_source", {{"service", s.name()}, {"element", id}}, 1, false);
  return out;
}

void AnalysisSession::record_flow(const std::string& service, const ElementId& from, const ElementId& to,
                                  bool connected) {
  log(kPhaseFlows, "q_flow", {{"service", service}, {"from", from}, {"to", to}}, connected ? 1 : 0, false);
}

ReasonerVerdict AnalysisSession::reason(const char* phase, const ReasonerTask& task, const ElementId& subject) {
  auto verdict = reasoner_.reason(task);
  log(phase, "reason", {{"task", std::string(task_name(task))}, {"element", subject}}, 1, false);
  return verdict;
}

namespace {

/// Routes q_user's reasoner calls through the session so they are traced.
class TracedReasoner final : public Reasoner {
 public:
  TracedReasoner(AnalysisSession& s, const char* phase) : s_(s), phase_(phase) {}
  ReasonerVerdict reason(const ReasonerTask& task) override {
    ElementId subject;
    if (const auto* c = std::get_if<ConfirmUserSource>(&task)) subject = c->endpoint;
    return s_.reason(phase_, task, subject);
  }
  std::string name() const override { return "traced"; }

 private:
  AnalysisSession& s_;
  const char* phase_;
};

std::string callee_prefix(std::string_view source) {
  std::string callee(source.substr(0, source.find('(')));
  while (!callee.empty() && std::isspace(static_cast<unsigned char>(callee.back()))) callee.pop_back();
  return callee;
}

std::vector<ToolSchema> search_tools() {
  return {
      {"q_name", "functions and variables whose name matches a pattern", {"service", "pattern", "mode"}},
      {"q_ast", "every element of one syntactic kind", {"service", "kind"}},
      {"finish", "stop searching", {}},
  };
}

struct OpsCollector {
  const Program& program;
  std::map<ElementId, PrivilegedOperation> ops;
  std::set<std::pair<const Service*, std::size_t>> privileged_functions;

  bool add(const Service& s, const Element& e, PrivCategory c, std::string rationale, bool baseline) {
    auto [it, inserted] = ops.emplace(e.id, PrivilegedOperation{s.name(), e.id, c, std::move(rationale), baseline});
    if (!inserted && baseline) it->second.baseline = true;
    return inserted;
  }
};

std::size_t classify_function(AnalysisSession& session, OpsCollector& col, const Service& s, const Element& f) {
  std::string src = session.get_source(kPhaseIdentify, s, f.id);
  auto v = std::get<PrivilegedClass>(session.reason(kPhaseIdentify, ClassifyPrivileged{f.id, "function", f.name, src}, f.id));
  if (!v.category) return 0;
  std::size_t fi = *s.index_of(f.id);
  col.privileged_functions.emplace(&s, fi);
  std::size_t added = 0;
  for (std::size_t site : s.in(EdgeKind::calls, fi)) {
    if (s.at(site).kind != ElementKind::call) continue;
    added += col.add(s, s.at(site), *v.category, "calls " + f.name + ": " + v.rationale, false) ? 1 : 0;
  }
  return added;
}

std::size_t classify_call(AnalysisSession& session, OpsCollector& col, const Service& s, const Element& c) {
  if (col.ops.contains(c.id)) return 0;
  auto v = std::get<PrivilegedClass>(session.reason(kPhaseIdentify, ClassifyPrivileged{c.id, "call", "", c.source}, c.id));
  if (!v.category) return 0;
  return col.add(s, c, *v.category, v.rationale, false) ? 1 : 0;
}

std::size_t run_action(AnalysisSession& session, OpsCollector& col, const Action& a) {
  auto arg = [&](const char* k) -> std::string {
    auto it = a.arguments.find(k);
    return it == a.arguments.end() ? "" : it->second;
  };
  const Service* s = session.program().service(arg("service"));
  if (s == nullptr) return 0;
  std::size_t added = 0;
  if (a.tool == "q_name") {
    NameMode mode = arg("mode") == "regex" ? NameMode::regex : NameMode::exact;
    std::vector<const Element*> hits;
    try {
      hits = session.q_name(kPhaseIdentify, *s, arg("pattern"), mode);
    } catch (const BadPattern&) {
      return 0;
    }
    for (const Element* e : hits) {
      if (e->kind == ElementKind::function) added += classify_function(session, col, *s, *e);
    }
  } else if (a.tool == "q_ast") {
    auto kind = parse_element_kind(arg("kind"));
    if (!kind) return 0;
    for (const Element* e : session.q_ast(kPhaseIdentify, *s, *kind)) {
      if (e->kind == ElementKind::function) added += classify_function(session, col, *s, *e);
      if (e->kind == ElementKind::call) added += classify_call(session, col, *s, *e);
    }
  }
  return added;
}

}  // namespace

std::vector<PrivilegedOperation> find_privileged_ops(AnalysisSession& session, bool basic_sink) {
  const Program& program = session.program();
  OpsCollector col{program, {}, {}};

  for (const auto& s : program.services) {
    for (const auto& e : s.elements()) {
      if (e.kind != ElementKind::call) continue;
      switch (minisrv::intrinsic_of(callee_prefix(e.source))) {
        case minisrv::Intrinsic::db_write:
          col.add(s, e, PrivCategory::protected_state, "standard sink: db.write modifies persistent state", true);
          break;
        case minisrv::Intrinsic::exec:
          col.add(s, e, PrivCategory::security_critical_action, "standard sink: exec runs a command", true);
          break;
        case minisrv::Intrinsic::http_post:
        case minisrv::Intrinsic::http_get: {
          auto v = std::get<PrivilegedClass>(
              session.reason(kPhaseIdentify, ClassifyPrivileged{e.id, "call", "", e.source}, e.id));
          if (v.category == PrivCategory::sensitive_resource) col.add(s, e, *v.category, v.rationale, true);
          break;
        }
        default: break;
      }
    }
  }

  if (!basic_sink) {
    SearchState state;
    for (const auto& s : program.services) state.services.push_back(s.name());
    const std::size_t round_length = 2 * program.services.size();
    std::size_t in_round = 0;
    std::size_t new_in_round = 0;
    try {
      while (true) {
        state.ops_found = col.ops.size();
        auto action = std::get<Action>(session.reason(kPhaseIdentify, NextSearchAction{state, search_tools()}, ""));
        if (action.finish()) break;
        std::string key = action_key(action);
        bool repeated = std::find(state.history.begin(), state.history.end(), key) != state.history.end();
        state.history.push_back(key);
        if (!repeated) new_in_round += run_action(session, col, action);
        if (++in_round >= round_length) {
          if (new_in_round == 0) break;
          ++state.round;
          in_round = 0;
          new_in_round = 0;
        }
      }
    } catch (const BudgetExhausted&) {
      // partial results are kept; the session carries the flag
    }

    // A call inside a privileged function that has callers is reported at
    // those call sites instead.
    for (const auto& [s, f] : col.privileged_functions) {
      bool called = false;
      for (std::size_t site : s->in(EdgeKind::calls, f)) called = called || s->at(site).kind == ElementKind::call;
      if (!called) continue;
      for (auto it = col.ops.begin(); it != col.ops.end();) {
        const PrivilegedOperation& op = it->second;
        auto idx = s->index_of(op.element);
        bool inside = op.service == s->name() && idx && enclosing_function(*s, *idx) == f;
        it = (inside && !op.baseline) ? col.ops.erase(it) : std::next(it);
      }
    }
  }

  std::vector<PrivilegedOperation> out;
  for (const auto& s : program.services) {
    for (const auto& e : s.elements()) {
      if (auto it = col.ops.find(e.id); it != col.ops.end()) out.push_back(it->second);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Check localization

namespace {

struct PathNode {
  const Service* service;
  std::size_t index;
};

std::vector<PathNode> expanded_nodes(const Program& program, const GlobalGraph& graph, const GlobalPath& path) {
  std::vector<PathNode> out;
  auto push = [&](const std::string& svc, const ElementId& id) {
    const Service* s = program.service(svc);
    if (s == nullptr) return;
    if (auto i = s->index_of(id)) out.push_back(PathNode{s, *i});
  };
  if (path.nodes.empty()) return out;
  push(graph.nodes[*graph.find(path.nodes[0])].service, path.nodes[0]);
  for (std::size_t e : path.edges) {
    const GlobalEdge& edge = graph.edges[e];
    if (const auto* fp = std::get_if<FlowPath>(&edge.witness)) {
      for (std::size_t k = 1; k < fp->nodes.size(); ++k) push(graph.nodes[edge.from].service, fp->nodes[k]);
    } else {
      push(graph.nodes[edge.to].service, graph.nodes[edge.to].element);
    }
  }
  return out;
}

std::size_t function_of(const Service& s, std::size_t index) {
  const Element& e = s.at(index);
  if (e.kind == ElementKind::function) return index;
  if (e.kind == ElementKind::endpoint || e.kind == ElementKind::decorator) {
    for (std::size_t f : s.out(EdgeKind::decorates, index)) {
      if (s.at(f).kind == ElementKind::function) return f;
    }
    return npos_index;
  }
  return enclosing_function(s, index);
}

/// Text between `if` and the block's opening brace.
std::string condition_text(std::string_view src) {
  std::size_t start = src.starts_with("if") ? 2 : 0;
  bool in_string = false;
  for (std::size_t i = start; i < src.size(); ++i) {
    char ch = src[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') in_string = true;
    if (ch == '{') {
      std::string out(src.substr(start, i - start));
      auto b = out.find_first_not_of(" \t\r\n");
      auto e = out.find_last_not_of(" \t\r\n");
      return b == std::string::npos ? "" : out.substr(b, e - b + 1);
    }
  }
  return std::string(src.substr(start));
}

/// Names called as bare functions in `text`.
std::vector<std::string> called_names(std::string_view text) {
  std::vector<std::string> out;
  char prev = '\0';
  bool in_string = false;
  for (std::size_t i = 0; i < text.size();) {
    char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      if (ch == '"') in_string = false;
      ++i;
      continue;
    }
    if (ch == '"') {
      in_string = true;
      prev = ch;
      ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      std::size_t k = j;
      while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (prev != '.' && k < text.size() && text[k] == '(') out.emplace_back(text.substr(i, j - i));
      prev = 'a';
      i = j;
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(ch))) prev = ch;
    ++i;
  }
  return out;
}

bool guards_like_check(const CheckVocabulary& vocab, const std::string& condition) {
  if (matches_any(vocab.ownership, condition)) return true;
  for (const auto& name : called_names(condition)) {
    if (matches_any(vocab.check_names, name)) return true;
  }
  return false;
}

struct Candidate {
  const Service* service;
  std::size_t index;
  Attachment attachment;
  std::string source;  // classified text
};

}  // namespace

std::vector<std::pair<const Service*, std::size_t>> path_functions(const Program& program, const GlobalGraph& graph,
                                                                    const GlobalPath& path) {
  std::vector<std::pair<const Service*, std::size_t>> out;
  for (const auto& n : expanded_nodes(program, graph, path)) {
    std::size_t f = function_of(*n.service, n.index);
    if (f == npos_index) continue;
    std::pair<const Service*, std::size_t> key{n.service, f};
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(key);
  }
  return out;
}

CheckContext locate_checks(AnalysisSession& session, const GlobalGraph& graph, const GlobalPath& path,
                           const ScanOptions& options) {
  const Program& program = session.program();
  const auto nodes = expanded_nodes(program, graph, path);
  const auto functions = path_functions(program, graph, path);
  const char* phase = kPhaseValidate;

  CheckContext ctx;
  std::vector<Candidate> candidates;
  std::set<std::pair<const Service*, std::size_t>> seen;
  auto evidence = [&](const Service& s, std::size_t i) {
    const ElementId& id = s.at(i).id;
    for (const auto& e : ctx.evidence) {
      if (e.element == id) return e.source;
    }
    std::string src = session.get_source(phase, s, id);
    ctx.evidence.push_back(Evidence{s.name(), id, src});
    return src;
  };
  auto candidate = [&](const Service& s, std::size_t i, Attachment a, std::string text) {
    if (seen.emplace(&s, i).second) candidates.push_back(Candidate{&s, i, a, std::move(text)});
  };

  for (const auto& [sp, f] : functions) {
    const Service& s = *sp;
    evidence(s, f);
    std::vector<std::size_t> decorators;
    for (std::size_t d : s.in(EdgeKind::decorates, f)) {
      if (s.at(d).kind == ElementKind::decorator) decorators.push_back(d);
    }
    for (std::size_t d : decorators) evidence(s, d);

    // Conditionals enclosing the last path node inside f.
    std::optional<std::size_t> last;
    for (const auto& n : nodes) {
      if (n.service == sp && n.index != f && s.at(n.index).kind != ElementKind::endpoint &&
          enclosing_function(s, n.index) == f) {
        last = n.index;
      }
    }
    std::vector<std::size_t> guards;
    for (std::size_t x = last.value_or(npos_index); x != npos_index && x != f;) {
      auto parents = s.in(EdgeKind::contains, x);
      if (parents.empty()) break;
      x = parents.front();
      if (x != f && s.at(x).kind == ElementKind::conditional) guards.push_back(x);
    }
    std::reverse(guards.begin(), guards.end());

    if (options.no_odctx) {
      for (std::size_t d : decorators) {
        if (s.at(d).name == "auth") candidate(s, d, Attachment::decorator, s.at(d).source);
      }
    } else {
      for (std::size_t d : decorators) {
        for (std::size_t t : s.out(EdgeKind::calls, d)) {
          if (s.at(t).kind != ElementKind::function) continue;
          candidate(s, t, Attachment::decorator, evidence(s, t));
          for (const Element* g : session.q_cg(phase, s, s.at(t).id, CgDirection::callees, 3)) {
            if (matches_any(options.vocabulary.check_names, g->name)) {
              std::size_t gi = *s.index_of(g->id);
              candidate(s, gi, Attachment::middleware, evidence(s, gi));
            }
          }
        }
      }
    }
    for (std::size_t c : guards) {
      std::string cond = condition_text(options.no_odctx ? s.at(c).source : evidence(s, c));
      if (guards_like_check(options.vocabulary, cond)) candidate(s, c, Attachment::inline_, cond);
    }
  }

  for (const auto& c : candidates) {
    const Element& e = c.service->at(c.index);
    auto v = std::get<CheckClass>(
        session.reason(phase, ClassifyCheck{e.id, std::string(to_string(e.kind)), e.name, c.source}, e.id));
    ctx.checks.push_back(CheckFinding{c.service->name(), e.id, v.kind, v.subtype, c.attachment, v.rationale});
  }
  return ctx;
}

Sufficiency assess_flow(AnalysisSession& session, const PrivilegedOperation& privop, const CheckContext& context) {
  const Program& program = session.program();
  ElementRef ref = program.find(privop.element);
  AssessSufficiency task;
  task.privop = privop.element;
  task.privop_source = ref.element != nullptr ? ref.element->source : "";
  task.category = privop.category;
  for (const auto& c : context.checks) {
    ElementRef cr = program.find(c.element);
    std::string src = cr.element != nullptr ? cr.element->source : "";
    if (cr.element != nullptr && cr.element->kind == ElementKind::conditional) src = condition_text(src);
    task.checks.push_back(CheckSummary{c.element, c.classification, c.subtype, src});
  }
  for (const auto& e : context.evidence) task.contexts.push_back(e.source);
  return std::get<Sufficiency>(session.reason(kPhaseValidate, task, privop.element));
}

// ---------------------------------------------------------------------------
// Scan

namespace {

ExtractConstraints constraint_task(const Program& program, const GlobalGraph& graph, const GlobalPath& path) {
  ExtractConstraints task;
  task.path = path.nodes;
  const auto nodes = expanded_nodes(program, graph, path);
  for (const auto& [s, f] : path_functions(program, graph, path)) {
    GuardContext ctx;
    ctx.service = s->name();
    ctx.function = s->at(f).name;
    ctx.source = s->at(f).source;
    ctx.origin = s->at(f).location;
    for (const auto& n : nodes) {
      if (n.service == s && n.index != f && enclosing_function(*s, n.index) == f) {
        ctx.nodes.push_back(s->at(n.index).location);
      }
    }
    task.contexts.push_back(std::move(ctx));
    auto& consts = task.constants[s->name()];
    if (consts.empty()) {
      for (const auto& e : s->elements()) {
        if (e.kind == ElementKind::variable && e.source.starts_with("const ")) consts.push_back(e.source);
      }
    }
  }
  return task;
}

void write_smt(const std::filesystem::path& dir, const std::string& id, const PathConstraint& pc) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / (id + ".smt2"), std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / (id + ".smt2")).string());
  out << emit_smtlib(pc);
}

}  // namespace

ScanResult scan(const Program& program, Reasoner& reasoner, const ScanBudget& budget, const ScanOptions& options) {
  if (auto v = validate_program(program); !v.empty()) throw Error("integrity: " + describe(v.front()));

  AnalysisSession session(program, reasoner, budget);
  ScanResult result;
  result.options = options;
  result.budget = budget;
  result.reasoner = reasoner.name();

  std::vector<PrivilegedOperation> privops = find_privileged_ops(session, options.basic_sink);

  ProgramChannels channels = collect_channels(program);
  for (const auto& u : channels.unresolved) {
    result.diagnostics.push_back("unresolved channel at " + u.service + ":" + u.element + ": " + u.reason);
  }
  ChannelMatches matches = match_channels(channels);
  result.diagnostics.insert(result.diagnostics.end(), matches.diagnostics.begin(), matches.diagnostics.end());

  // Outbound calls that reach another service are hops, not sinks.
  std::set<ElementId> matched_out;
  for (const auto& e : matches.edges) matched_out.insert(e.from.element);
  std::erase_if(privops, [&](const PrivilegedOperation& op) { return matched_out.contains(op.element); });
  result.privops = privops;

  TracedReasoner traced(session, kPhaseFlows);
  std::vector<ElementId> users;
  for (const Element* e : q_user(program, traced)) users.push_back(e->id);

  GraphInputs inputs;
  for (const auto& op : privops) inputs.privops.push_back(op.element);
  inputs.user_sources = users;
  inputs.channels = channels;
  inputs.channel_edges = matches.edges;
  GlobalGraph graph = build_global_graph(
      program, inputs,
      [&](const std::string& svc, const ElementId& from, const ElementId& to, bool connected) {
        session.record_flow(svc, from, to, connected);
      },
      options.parallel);

  GlobalFlows flows = q_globalflow(graph, users, inputs.privops, budget.max_flows);
  if (flows.truncated) {
    session.mark_exhausted("more than " + std::to_string(budget.max_flows) + " flows");
    result.diagnostics.push_back("flow enumeration stopped at " + std::to_string(budget.max_flows) + " paths");
  }

  std::map<ElementId, const PrivilegedOperation*> op_by_id;
  for (const auto& op : privops) op_by_id[op.element] = &op;

  Funnel& funnel = result.funnel;
  funnel.initial = flows.paths.size();
  for (std::size_t i = 0; i < flows.paths.size(); ++i) {
    const GlobalPath& path = flows.paths[i];
    try {
      if (session.exhausted()) throw BudgetExhausted(session.usage().reason);
      session.check_clock();
      Finding f;
      f.path = path;
      f.privop = *op_by_id.at(path.nodes.back());
      for (std::size_t e : path.edges) {
        const GlobalEdge& edge = graph.edges[e];
        Hop h;
        if (const auto* ce = std::get_if<ChannelEdge>(&edge.witness)) {
          h.channel = *ce;
        } else {
          h.service = graph.nodes[edge.from].service;
          h.flow = std::get<FlowPath>(edge.witness);
        }
        f.hops.push_back(std::move(h));
      }

      auto cv = std::get<Constraints>(session.reason(kPhaseValidate, constraint_task(program, graph, path), path.id));
      if (const auto* pc = std::get_if<PathConstraint>(&cv.result)) {
        if (options.emit_smt) write_smt(*options.emit_smt, path.id, *pc);
        SatResult sat = check_sat(*pc);
        if (std::holds_alternative<Unsat>(sat)) {
          ++funnel.pruned;
          continue;
        }
        f.constraint = render(pc->formula);
        if (const auto* u = std::get_if<Unknown>(&sat)) {
          f.feasibility = Feasibility::unknown;
          f.constraint += " (solver: " + u->reason + ")";
        }
      } else {
        f.feasibility = Feasibility::unknown;
        f.constraint = "skipped: " + std::get<Skipped>(cv.result).reason;
      }

      CheckContext ctx = locate_checks(session, graph, path, options);
      Sufficiency verdict = assess_flow(session, f.privop, ctx);
      if (verdict.verdict == SufficiencyVerdict::protected_) {
        ++funnel.protected_dropped;
        continue;
      }
      f.checks = std::move(ctx.checks);
      f.evidence = std::move(ctx.evidence);
      f.verdict = verdict.verdict;
      f.rationale = verdict.rationale;
      result.findings.push_back(std::move(f));
    } catch (const BudgetExhausted&) {
      funnel.truncated = flows.paths.size() - i;
      break;
    }
  }
  funnel.findings = result.findings.size();

  auto sort_key = [&](const Finding& f) {
    ElementRef r = program.find(f.privop.element);
    Location loc = r.element != nullptr ? r.element->location : Location{};
    return std::make_tuple(f.privop.service, loc.file, loc.line, loc.col, f.path.id);
  };
  std::stable_sort(result.findings.begin(), result.findings.end(),
                   [&](const Finding& a, const Finding& b) { return sort_key(a) < sort_key(b); });

  result.usage = session.usage();
  result.trace = session.trace();
  return result;
}

}  // namespace privflow
