#include "privflow/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "privflow/code_search.hpp"
#include "privflow/cross_service.hpp"
#include "privflow/error.hpp"
#include "privflow/facts_io.hpp"
#include "privflow/loader.hpp"
#include "privflow/pipeline.hpp"
#include "privflow/reasoner.hpp"
#include "privflow/report.hpp"

#ifndef PRIVFLOW_PROMPTS_DIR
#define PRIVFLOW_PROMPTS_DIR "prompts"
#endif

namespace privflow {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct BackendFlags {
  std::string reasoner = "scripted";
  std::string rules;
  std::string remote_url;
  std::string model = "gpt-4o";
  double temperature = 0.2;
  std::string prompts = PRIVFLOW_PROMPTS_DIR;
};

struct ScanFlags {
  std::string dir;
  BackendFlags backend;
  bool basic_sink = false;
  bool no_odctx = false;
  std::string format = "json";
  std::string trace;
  std::string emit_smt;
  std::string output;
  std::size_t budget_calls = 40;
  double budget_seconds = 600;
  std::size_t max_flows = 10000;
};

struct QueryFlags {
  std::string dir;
  std::string service;
  std::string op;
  std::string pattern;
  std::string mode = "exact";
  std::string kind;
  std::string from;
  std::string to;
  std::string function;
  std::string direction = "callees";
  int depth = 1;
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
  cmd->add_option("--reasoner", f.reasoner, "Reasoner backend")->check(CLI::IsMember({"scripted", "remote"}));
  cmd->add_option("--rules", f.rules, "Oracle rules file (default: <dir>/oracle.rules.json if present)");
  cmd->add_option("--remote-url", f.remote_url, "Chat-completions endpoint (or PRIVFLOW_REMOTE_URL)");
  cmd->add_option("--model", f.model, "Remote model name");
  cmd->add_option("--temperature", f.temperature, "Remote sampling temperature");
  cmd->add_option("--prompts", f.prompts, "Prompt template directory");
}

OracleRules rules_for(const BackendFlags& f, const fs::path& dir) {
  if (!f.rules.empty()) return load_rules(f.rules);
  fs::path local = dir / "oracle.rules.json";
  if (fs::exists(local)) return load_rules(local);
  return default_rules();
}

std::unique_ptr<Reasoner> make_reasoner(const BackendFlags& f, const OracleRules& rules) {
  if (f.reasoner == "scripted") return std::make_unique<ScriptedOracle>(rules);
  RemoteConfig cfg;
  cfg.url = f.remote_url;
  if (cfg.url.empty()) {
    if (const char* env = std::getenv("PRIVFLOW_REMOTE_URL")) cfg.url = env;
  }
  if (cfg.url.empty()) throw Error("--reasoner remote needs --remote-url or PRIVFLOW_REMOTE_URL");
  cfg.model = f.model;
  cfg.temperature = f.temperature;
  cfg.prompts_dir = f.prompts;
  return std::make_unique<RemoteReasoner>(cfg);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

int run_scan(const ScanFlags& f, std::ostream& out) {
  auto fmt = parse_report_format(f.format);
  Program program = load_program(f.dir);
  OracleRules rules = rules_for(f.backend, f.dir);
  auto reasoner = make_reasoner(f.backend, rules);

  ScanBudget budget;
  budget.max_calls_per_phase = f.budget_calls;
  budget.wall_clock = std::chrono::milliseconds(static_cast<std::int64_t>(f.budget_seconds * 1000));
  budget.max_flows = f.max_flows;
  if (budget.max_calls_per_phase == 0 || budget.wall_clock.count() <= 0 || budget.max_flows == 0) {
    throw Error("budget limits must be positive");
  }
  ScanOptions options;
  options.basic_sink = f.basic_sink;
  options.no_odctx = f.no_odctx;
  if (!f.emit_smt.empty()) options.emit_smt = fs::path(f.emit_smt);
  options.vocabulary = CheckVocabulary::from(rules);
  options.parallel = f.backend.reasoner == "scripted";

  ScanResult result = scan(program, *reasoner, budget, options);
  if (!f.trace.empty()) write_text(f.trace, trace_jsonl(result.trace));
  std::string text = render_report(program, result, *fmt);
  if (f.output.empty()) {
    out << text;
  } else {
    write_text(f.output, text);
  }
  return exit_status(result);
}

json element_json(const Element& e) {
  return {{"id", e.id},
          {"kind", to_string(e.kind)},
          {"name", e.name},
          {"file", e.location.file},
          {"line", e.location.line},
          {"col", e.location.col},
          {"type", e.inferred_type},
          {"source", e.source}};
}

int run_query(const QueryFlags& f, std::ostream& out) {
  Program program = load_program(f.dir);
  const Service* s = program.service(f.service);
  if (s == nullptr) throw Error("no service named '" + f.service + "'");
  auto emit = [&](const std::vector<const Element*>& els) {
    for (const Element* e : els) out << element_json(*e).dump() << "\n";
  };
  if (f.op == "name") {
    emit(q_name(*s, f.pattern, f.mode == "regex" ? NameMode::regex : NameMode::exact));
  } else if (f.op == "ast") {
    auto kind = parse_element_kind(f.kind);
    if (!kind) throw Error("unknown element kind '" + f.kind + "'");
    emit(q_ast(*s, *kind));
  } else if (f.op == "flow") {
    for (const auto& p : q_flow(*s, f.from, f.to)) {
      json hops = json::array();
      for (auto h : p.hops) hops.push_back(to_string(h));
      out << json{{"nodes", p.nodes}, {"hops", hops}}.dump() << "\n";
    }
  } else {
    emit(q_cg(*s, f.function, f.direction == "callers" ? CgDirection::callers : CgDirection::callees, f.depth));
  }
  return kExitClean;
}

int run_graph(const std::string& dir, const BackendFlags& backend, std::ostream& out) {
  Program program = load_program(dir);
  if (auto v = validate_program(program); !v.empty()) throw Error("integrity: " + describe(v.front()));
  OracleRules rules = rules_for(backend, dir);
  auto reasoner = make_reasoner(backend, rules);
  AnalysisSession session(program, *reasoner, ScanBudget{});
  GraphInputs inputs;
  ProgramChannels channels = collect_channels(program);
  ChannelMatches matches = match_channels(channels);
  std::set<ElementId> matched;
  for (const auto& e : matches.edges) matched.insert(e.from.element);
  for (const auto& op : find_privileged_ops(session, false)) {
    if (!matched.contains(op.element)) inputs.privops.push_back(op.element);
  }
  for (const Element* e : q_user(program, *reasoner)) inputs.user_sources.push_back(e->id);
  inputs.channels = std::move(channels);
  inputs.channel_edges = std::move(matches.edges);
  out << to_dot(build_global_graph(program, inputs), program);
  return kExitClean;
}

int run_facts(const std::string& dir, const std::string& out_dir, std::ostream& out) {
  Program program = load_program(dir);
  fs::create_directories(out_dir);
  for (const auto& s : program.services) {
    fs::path file = fs::path(out_dir) / (s.name() + ".facts.jsonl");
    write_text(file.string(), write_facts(s));
    out << file.string() << "\n";
  }
  return kExitClean;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"privflow: static privilege-escalation analysis for multi-service programs", "privflow"};
  app.require_subcommand(1);

  ScanFlags sf;
  auto* scan_cmd = app.add_subcommand("scan", "Analyze a corpus directory and print a report");
  scan_cmd->add_option("dir", sf.dir, "Directory containing privflow.manifest.json")->required();
  add_backend_flags(scan_cmd, sf.backend);
  scan_cmd->add_flag("--basic-sink", sf.basic_sink, "Only use the standard sink intrinsics");
  scan_cmd->add_flag("--no-odctx", sf.no_odctx, "One-shot context retrieval instead of on-demand");
  scan_cmd->add_option("--format", sf.format, "Report format")->check(CLI::IsMember({"json", "md"}));
  scan_cmd->add_option("--trace", sf.trace, "Write the tool-call trace as JSON lines");
  scan_cmd->add_option("--emit-smt", sf.emit_smt, "Write one SMT-LIB file per flow into this directory");
  scan_cmd->add_option("--output,-o", sf.output, "Write the report here instead of stdout");
  scan_cmd->add_option("--budget-calls", sf.budget_calls, "Tool calls per phase");
  scan_cmd->add_option("--budget-seconds", sf.budget_seconds, "Wall-clock limit");
  scan_cmd->add_option("--max-flows", sf.max_flows, "Flow enumeration cap");

  QueryFlags qf;
  auto* query_cmd = app.add_subcommand("query", "Run one code-search primitive; results as JSON lines");
  query_cmd->add_option("dir", qf.dir)->required();
  query_cmd->add_option("--service", qf.service)->required();
  query_cmd->add_option("--op", qf.op)->required()->check(CLI::IsMember({"name", "ast", "flow", "cg"}));
  query_cmd->add_option("--pattern", qf.pattern, "q_name pattern");
  query_cmd->add_option("--mode", qf.mode, "q_name mode")->check(CLI::IsMember({"exact", "regex"}));
  query_cmd->add_option("--kind", qf.kind, "q_ast element kind");
  query_cmd->add_option("--from", qf.from, "q_flow source selector");
  query_cmd->add_option("--to", qf.to, "q_flow sink selector");
  query_cmd->add_option("--function", qf.function, "q_cg start function");
  query_cmd->add_option("--direction", qf.direction)->check(CLI::IsMember({"callers", "callees"}));
  query_cmd->add_option("--depth", qf.depth)->check(CLI::PositiveNumber);

  std::string graph_dir;
  BackendFlags gb;
  auto* graph_cmd = app.add_subcommand("graph", "Print the global reachability graph in DOT");
  graph_cmd->add_option("dir", graph_dir)->required();
  add_backend_flags(graph_cmd, gb);

  std::string facts_dir;
  std::string facts_out;
  auto* facts_cmd = app.add_subcommand("facts", "Export every service as a facts file");
  facts_cmd->add_option("dir", facts_dir)->required();
  facts_cmd->add_option("--out", facts_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitClean : kExitError;
  }

  try {
    if (*scan_cmd) return run_scan(sf, out);
    if (*query_cmd) return run_query(qf, out);
    if (*graph_cmd) return run_graph(graph_dir, gb, out);
    return run_facts(facts_dir, facts_out, out);
  } catch (const Error& e) {
    err << "privflow: error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "privflow: error: " << e.what() << "\n";
  }
  return kExitError;
}

}  // namespace privflow
