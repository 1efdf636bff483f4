#include "privflow/report.hpp"

#include <sstream>

namespace privflow {

using json = nlohmann::ordered_json;

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::json;
  if (text == "md") return ReportFormat::md;
  return std::nullopt;
}

namespace {

json element_ref(const Program& program, const ElementId& id) {
  ElementRef r = program.find(id);
  if (r.element == nullptr) return json{{"element", id}};
  return json{{"element", id},
              {"service", r.service->name()},
              {"kind", to_string(r.element->kind)},
              {"file", r.element->location.file},
              {"line", r.element->location.line},
              {"col", r.element->location.col},
              {"source", r.element->source}};
}

std::string sink_text(const Program& program, const ElementId& id) {
  ElementRef r = program.find(id);
  if (r.element == nullptr) return id;
  const std::string& s = r.element->source;
  return s.substr(0, s.find('('));
}

json privop_json(const Program& program, const PrivilegedOperation& op) {
  json j = element_ref(program, op.element);
  j["sink"] = sink_text(program, op.element);
  j["category"] = to_string(op.category);
  j["baseline"] = op.baseline;
  j["rationale"] = op.rationale;
  return j;
}

}  // namespace

json report_json(const Program& program, const ScanResult& result) {
  json services = json::array();
  for (const auto& s : program.services) {
    services.push_back({{"name", s.name()},
                        {"entry", s.entry()},
                        {"elements", s.size()},
                        {"edges", s.edges().size()},
                        {"supplied_channels", s.supplied_channels().size()}});
  }
  json routes = json::array();
  for (const auto& r : program.manifest.gateway_routes) routes.push_back({{"prefix", r.prefix}, {"target", r.target}});

  json privops = json::array();
  for (const auto& op : result.privops) privops.push_back(privop_json(program, op));

  json findings = json::array();
  for (const auto& f : result.findings) {
    ElementRef r = program.find(f.privop.element);
    json checks = json::array();
    for (const auto& c : f.checks) {
      json cj = element_ref(program, c.element);
      cj["classification"] = to_string(c.classification);
      cj["authz_subtype"] = to_string(c.subtype);
      cj["attachment"] = to_string(c.attachment);
      cj["rationale"] = c.rationale;
      checks.push_back(std::move(cj));
    }
    json evidence = json::array();
    for (const auto& e : f.evidence) evidence.push_back({{"service", e.service}, {"element", e.element}, {"source", e.source}});
    json hops = json::array();
    for (const auto& h : f.hops) {
      if (h.channel) {
        hops.push_back({{"kind", "channel"},
                        {"protocol", to_string(h.channel->from.protocol)},
                        {"from_service", h.channel->from_service},
                        {"to_service", h.channel->to_service},
                        {"identifier", h.channel->from.identifier},
                        {"endpoint", h.channel->to.identifier},
                        {"rule", to_string(h.channel->rule)},
                        {"from", element_ref(program, h.channel->from.element)},
                        {"to", element_ref(program, h.channel->to.element)}});
      } else {
        hops.push_back({{"kind", "flow"},
                        {"service", h.service},
                        {"steps", h.flow.hops.size()},
                        {"from", element_ref(program, h.flow.nodes.front())},
                        {"to", element_ref(program, h.flow.nodes.back())}});
      }
    }
    findings.push_back({{"path_id", f.path.id},
                        {"service", f.privop.service},
                        {"file", r.element != nullptr ? r.element->location.file : ""},
                        {"line", r.element != nullptr ? r.element->location.line : 0},
                        {"verdict", to_string(f.verdict)},
                        {"feasibility", to_string(f.feasibility)},
                        {"constraint", f.constraint},
                        {"privop", privop_json(program, f.privop)},
                        {"path", f.path.nodes},
                        {"hops", hops},
                        {"checks", checks},
                        {"rationale", f.rationale},
                        {"evidence", evidence}});
  }

  json calls = json::object();
  for (const auto& [phase, n] : result.usage.calls) calls[phase] = n;

  json report;
  report["schema"] = kReportSchema;
  report["version"] = kReportVersion;
  report["program"] = {{"services", services}, {"gateway_routes", routes}};
  report["options"] = {{"reasoner", result.reasoner},
                       {"basic_sink", result.options.basic_sink},
                       {"no_odctx", result.options.no_odctx}};
  report["privileged_operations"] = privops;
  report["funnel"] = {{"initial", result.funnel.initial},
                      {"constraint_pruned", result.funnel.pruned},
                      {"protected_dropped", result.funnel.protected_dropped},
                      {"findings", result.funnel.findings},
                      {"budget_truncated", result.funnel.truncated}};
  report["findings"] = findings;
  report["budget"] = {{"max_calls_per_phase", result.budget.max_calls_per_phase},
                      {"wall_clock_seconds", std::chrono::duration<double>(result.budget.wall_clock).count()},
                      {"max_flows", result.budget.max_flows},
                      {"calls", calls},
                      {"exhausted", result.usage.exhausted},
                      {"reason", result.usage.reason}};
  report["diagnostics"] = result.diagnostics;
  report["trace_events"] = result.trace.size();
  return report;
}

std::string render_json(const json& report) { return report.dump(2) + "\n"; }

namespace {

std::string one_line(std::string s, std::size_t max = 80) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\t') ch = ' ';
  }
  std::string out;
  for (char ch : s) {
    if (ch == ' ' && !out.empty() && out.back() == ' ') continue;
    out.push_back(ch);
  }
  if (out.size() > max) out = out.substr(0, max - 3) + "...";
  return out;
}

std::string code(const json& ref) { return "`" + one_line(ref.value("source", ref.value("element", ""))) + "`"; }

std::string where(const json& ref) {
  return ref.value("file", "?") + ":" + std::to_string(ref.value("line", 0));
}

}  // namespace

std::string render_markdown(const json& report) {
  std::ostringstream md;
  md << "# privflow report\n\n";
  md << "Reasoner: " << report["options"]["reasoner"].get<std::string>();
  if (report["options"]["basic_sink"].get<bool>()) md << ", basic sinks only";
  if (report["options"]["no_odctx"].get<bool>()) md << ", one-shot context";
  md << "\n\n";

  md << "| service | entry | elements | edges |\n|---|---|---|---|\n";
  for (const auto& s : report["program"]["services"]) {
    md << "| " << s["name"].get<std::string>() << " | " << (s["entry"].get<bool>() ? "yes" : "") << " | "
       << s["elements"].get<std::size_t>() << " | " << s["edges"].get<std::size_t>() << " |\n";
  }

  const auto& fun = report["funnel"];
  md << "\n## Funnel\n\n";
  md << "| initial flows | constraint-pruned | protected (dropped) | findings | budget-truncated |\n";
  md << "|---|---|---|---|---|\n";
  md << "| " << fun["initial"] << " | " << fun["constraint_pruned"] << " | " << fun["protected_dropped"] << " | "
     << fun["findings"] << " | " << fun["budget_truncated"] << " |\n";

  md << "\n## Findings\n\n";
  if (report["findings"].empty()) md << "None.\n";
  std::size_t n = 0;
  for (const auto& f : report["findings"]) {
    const auto& op = f["privop"];
    md << "### " << ++n << ". " << f["verdict"].get<std::string>() << ": " << code(op) << "\n\n";
    md << "- Location: " << f["service"].get<std::string>() << ", " << where(op) << "\n";
    md << "- Category: " << op["category"].get<std::string>() << "\n";
    md << "- Path: " << f["path_id"].get<std::string>() << "\n";
    md << "- Feasibility: " << f["feasibility"].get<std::string>();
    if (!f["constraint"].get<std::string>().empty()) md << " (" << f["constraint"].get<std::string>() << ")";
    md << "\n- Rationale: " << f["rationale"].get<std::string>() << "\n\n";
    md << "Hops:\n\n";
    for (const auto& h : f["hops"]) {
      if (h["kind"] == "channel") {
        md << "1. " << h["from_service"].get<std::string>() << " -> " << h["to_service"].get<std::string>() << " via "
           << h["protocol"].get<std::string>() << " channel `" << h["identifier"].get<std::string>() << "` matching `"
           << h["endpoint"].get<std::string>() << "` (" << h["rule"].get<std::string>() << ")\n";
      } else {
        md << "1. " << h["service"].get<std::string>() << ": " << code(h["from"]) << " -> " << code(h["to"]) << " ("
           << h["steps"].get<std::size_t>() << " steps)\n";
      }
    }
    md << "\nChecks:\n\n";
    if (f["checks"].empty()) md << "none\n";
    for (const auto& c : f["checks"]) {
      md << "- " << c["classification"].get<std::string>();
      if (c["authz_subtype"] != "none") md << "/" << c["authz_subtype"].get<std::string>();
      md << " (" << c["attachment"].get<std::string>() << ") " << c.value("service", "") << " " << where(c) << ": "
         << c["rationale"].get<std::string>() << "\n";
    }
    md << "\nEvidence:\n";
    for (const auto& e : f["evidence"]) {
      md << "\n```\n" << e["source"].get<std::string>() << "\n```\n";
    }
    md << "\n";
  }

  md << "## Privileged operations\n\n";
  if (report["privileged_operations"].empty()) md << "None.\n";
  for (const auto& op : report["privileged_operations"]) {
    md << "- " << code(op) << " " << op.value("service", "") << " " << where(op) << ", "
       << op["category"].get<std::string>() << (op["baseline"].get<bool>() ? ", standard sink" : "") << "\n";
  }

  const auto& b = report["budget"];
  md << "\n## Budget\n\n";
  for (const auto& [phase, used] : b["calls"].items()) {
    md << "- " << phase << ": " << used.get<std::size_t>() << " of " << b["max_calls_per_phase"].get<std::size_t>()
       << " tool calls\n";
  }
  if (b["exhausted"].get<bool>()) md << "- exhausted: " << b["reason"].get<std::string>() << "\n";

  if (!report["diagnostics"].empty()) {
    md << "\n## Diagnostics\n\n";
    for (const auto& d : report["diagnostics"]) md << "- " << d.get<std::string>() << "\n";
  }
  return md.str();
}

std::string render_report(const Program& program, const ScanResult& result, ReportFormat format) {
  json j = report_json(program, result);
  return format == ReportFormat::json ? render_json(j) : render_markdown(j);
}

ExitStatus exit_status(const ScanResult& result) {
  if (result.usage.exhausted) return kExitBudget;
  return result.findings.empty() ? kExitClean : kExitFindings;
}

std::string trace_jsonl(const std::vector<TraceEvent>& trace) {
  std::string out;
  for (const auto& ev : trace) {
    json args = json::object();
    for (const auto& [k, v] : ev.arguments) args[k] = v;
    json j = {{"seq", ev.seq},         {"phase", ev.phase},     {"tool", ev.tool},           {"arguments", args},
              {"results", ev.results}, {"counted", ev.counted}, {"elapsed_us", ev.elapsed_us}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace privflow
