#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "privflow/error.hpp"
#include "privflow/reasoner.hpp"

namespace privflow {

using json = nlohmann::ordered_json;

namespace {

json location_json(const Location& l) { return json{{"file", l.file}, {"line", l.line}, {"col", l.col}}; }

struct TaskJson {
  json operator()(const ClassifyPrivileged& t) const {
    return {{"element", t.element}, {"kind", t.kind}, {"name", t.name}, {"source", t.source}};
  }
  json operator()(const ClassifyCheck& t) const {
    return {{"element", t.element}, {"kind", t.kind}, {"name", t.name}, {"source", t.source}};
  }
  json operator()(const AssessSufficiency& t) const {
    json checks = json::array();
    for (const auto& c : t.checks) {
      checks.push_back({{"element", c.element},
                        {"classification", to_string(c.kind)},
                        {"authz_subtype", to_string(c.subtype)},
                        {"source", c.source}});
    }
    return {{"privileged_operation", t.privop_source},
            {"category", to_string(t.category)},
            {"checks", checks},
            {"contexts", t.contexts}};
  }
  json operator()(const ExtractConstraints& t) const {
    json ctx = json::array();
    for (const auto& c : t.contexts) {
      json nodes = json::array();
      for (const auto& n : c.nodes) nodes.push_back(location_json(n));
      ctx.push_back({{"service", c.service},
                     {"function", c.function},
                     {"origin", location_json(c.origin)},
                     {"source", c.source},
                     {"path_nodes", nodes}});
    }
    json consts = json::object();
    for (const auto& [svc, items] : t.constants) consts[svc] = items;
    return {{"path", t.path}, {"functions", ctx}, {"constants", consts}};
  }
  json operator()(const ConfirmUserSource& t) const {
    json routes = json::array();
    for (const auto& r : t.routes) routes.push_back({{"prefix", r.prefix}, {"target", r.target}});
    return {{"endpoint", t.path}, {"service", t.service}, {"gateway_routes", routes}};
  }
  json operator()(const NextSearchAction& t) const {
    json tools = json::array();
    for (const auto& tool : t.tools) {
      tools.push_back({{"name", tool.name}, {"description", tool.description}, {"arguments", tool.arguments}});
    }
    return {{"services", t.state.services},
            {"round", t.state.round},
            {"privileged_operations_found", t.state.ops_found},
            {"history", t.state.history},
            {"tools", tools}};
  }
};

const char* schema_for(const ReasonerTask& task) {
  switch (task.index()) {
    case 0:
      return R"({"category": "sensitive-resource" | "security-critical-action" | "protected-state" | "none", "rationale": string})";
    case 1:
      return R"({"classification": "authn" | "authz", "authz_subtype": "role" | "permission" | "ownership" | "none", "rationale": string})";
    case 2:
      return R"({"verdict": "protected" | "unprotected" | "missing_authz" | "insufficient_authz", "rationale": string})";
    case 3:
      return R"({"skipped": boolean, "reason": string, "variables": [{"name": string, "type": "int" | "string" | "bool"}], "atoms": [{"lhs": term, "op": "==" | "!=" | "<" | "<=" | ">" | ">=", "rhs": term} | {"bool_var": string, "negated": boolean}]} where term is {"var": string} | {"int": integer} | {"string": string}; atoms are conjoined)";
    case 4: return R"({"user_source": boolean, "rationale": string})";
    default:
      return R"({"tool": "q_name" | "q_ast" | "finish", "arguments": {string: string}, "rationale": string})";
  }
}

[[noreturn]] void bad(const std::string& why) { throw SchemaViolation("reply violates schema: " + why); }

std::string rationale_of(const json& j) {
  if (!j.contains("rationale") || !j.at("rationale").is_string() || j.at("rationale").get<std::string>().empty()) {
    bad("missing rationale");
  }
  return j.at("rationale").get<std::string>();
}

std::string string_at(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string()) bad(std::string("missing string '") + key + "'");
  return j.at(key).get<std::string>();
}

Term term_from(const json& j) {
  if (!j.is_object() || j.size() != 1) bad("term must be an object with one key");
  if (j.contains("var") && j.at("var").is_string()) return Term::var(j.at("var").get<std::string>());
  if (j.contains("int") && j.at("int").is_number_integer()) return Term::integer(j.at("int").get<std::int64_t>());
  if (j.contains("string") && j.at("string").is_string()) return Term::string(j.at("string").get<std::string>());
  bad("unknown term");
}

std::optional<CmpOp> cmp_from(std::string_view s) {
  for (auto op : {CmpOp::eq, CmpOp::ne, CmpOp::lt, CmpOp::le, CmpOp::gt, CmpOp::ge}) {
    if (to_string(op) == s) return op;
  }
  return std::nullopt;
}

Constraints constraints_from(const json& j) {
  if (!j.contains("skipped") || !j.at("skipped").is_boolean()) bad("missing 'skipped'");
  if (j.at("skipped").get<bool>()) {
    std::string reason = string_at(j, "reason");
    if (reason.empty()) bad("empty skip reason");
    return {Skipped{reason}, "skipped: " + reason};
  }
  PathConstraint pc;
  if (!j.contains("variables") || !j.at("variables").is_array()) bad("missing 'variables'");
  for (const auto& v : j.at("variables")) {
    std::string type = string_at(v, "type");
    VarType t = type == "int" ? VarType::int_ : type == "string" ? VarType::string : VarType::bool_;
    if (type != "int" && type != "string" && type != "bool") bad("unknown variable type '" + type + "'");
    pc.variables.push_back(Variable{string_at(v, "name"), t});
  }
  if (!j.contains("atoms") || !j.at("atoms").is_array()) bad("missing 'atoms'");
  std::vector<Formula> atoms;
  for (const auto& a : j.at("atoms")) {
    if (a.contains("bool_var")) {
      Formula f = Formula::boolean(string_at(a, "bool_var"));
      bool negated = a.contains("negated") && a.at("negated").is_boolean() && a.at("negated").get<bool>();
      atoms.push_back(negated ? Formula::negation(std::move(f)) : std::move(f));
      continue;
    }
    if (!a.contains("lhs") || !a.contains("rhs")) bad("atom needs lhs and rhs");
    auto op = cmp_from(string_at(a, "op"));
    if (!op) bad("unknown operator");
    atoms.push_back(Formula::compare(term_from(a.at("lhs")), *op, term_from(a.at("rhs"))));
  }
  if (atoms.size() == 1) {
    pc.formula = std::move(atoms.front());
  } else if (!atoms.empty()) {
    pc.formula.kind = Formula::Kind::and_;
    pc.formula.children = std::move(atoms);
  }
  try {
    validate(pc);
  } catch (const ConstraintError& e) {
    bad(e.what());
  }
  std::string rationale = j.contains("rationale") && j.at("rationale").is_string()
                              ? j.at("rationale").get<std::string>()
                              : "constraints from remote backend";
  return {pc, rationale};
}

std::string strip_fences(std::string_view reply) {
  std::string s(reply);
  auto b = s.find('{');
  auto e = s.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b) return s;
  return s.substr(b, e - b + 1);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read prompt template " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

struct Url {
  std::string scheme_host_port;
  std::string path;
  bool https = false;
};

Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("remote url must start with http:// or https://: " + url);
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported url scheme: " + scheme);
  auto path_begin = url.find('/', scheme_end + 3);
  Url u;
  u.https = scheme == "https";
  u.scheme_host_port = url.substr(0, path_begin);
  u.path = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  return u;
}

}  // namespace

std::string task_to_json(const ReasonerTask& task) { return std::visit(TaskJson{}, task).dump(2); }

ReasonerVerdict parse_verdict(const ReasonerTask& task, std::string_view reply) {
  json j;
  try {
    j = json::parse(strip_fences(reply));
  } catch (const json::parse_error&) {
    bad("not JSON");
  }
  if (!j.is_object()) bad("not a JSON object");
  switch (task.index()) {
    case 0: {
      std::string cat = string_at(j, "category");
      if (cat == "none") return PrivilegedClass{std::nullopt, rationale_of(j)};
      auto c = parse_priv_category(cat);
      if (!c) bad("unknown category '" + cat + "'");
      return PrivilegedClass{c, rationale_of(j)};
    }
    case 1: {
      auto k = parse_check_kind(string_at(j, "classification"));
      auto s = parse_authz_subtype(j.contains("authz_subtype") ? string_at(j, "authz_subtype") : "none");
      if (!k || !s) bad("unknown classification");
      if ((*k == CheckKind::authn) != (*s == AuthzSubtype::none)) bad("authz_subtype must be none exactly for authn");
      return CheckClass{*k, *s, rationale_of(j)};
    }
    case 2: {
      auto v = parse_sufficiency(string_at(j, "verdict"));
      if (!v) bad("unknown verdict");
      return Sufficiency{*v, rationale_of(j)};
    }
    case 3: return constraints_from(j);
    case 4:
      if (!j.contains("user_source") || !j.at("user_source").is_boolean()) bad("missing 'user_source'");
      return UserSource{j.at("user_source").get<bool>(), rationale_of(j)};
    default: {
      Action a;
      a.tool = string_at(j, "tool");
      if (a.tool != "q_name" && a.tool != "q_ast" && a.tool != "finish") bad("unknown tool '" + a.tool + "'");
      if (j.contains("arguments")) {
        if (!j.at("arguments").is_object()) bad("arguments must be an object");
        for (const auto& [k, v] : j.at("arguments").items()) {
          if (!v.is_string()) bad("argument values must be strings");
          a.arguments[k] = v.get<std::string>();
        }
      }
      a.rationale = rationale_of(j);
      return a;
    }
  }
}

RemoteReasoner::RemoteReasoner(RemoteConfig config) : config_(std::move(config)) {
  split_url(config_.url);
  system_prompt_ = read_file(config_.prompts_dir / "system.md");
  replace_all(system_prompt_, "{{demonstrations}}", read_file(config_.prompts_dir / "demonstrations.md"));
  for (std::string_view n : {"ClassifyPrivileged", "ClassifyCheck", "AssessSufficiency", "ExtractConstraints",
                             "ConfirmUserSource", "NextSearchAction"}) {
    templates_[std::string(n)] = read_file(config_.prompts_dir / (std::string(n) + ".md"));
  }
}

RemoteReasoner::~RemoteReasoner() = default;

std::string RemoteReasoner::render_prompt(const ReasonerTask& task) const {
  std::string prompt = templates_.at(std::string(task_name(task)));
  replace_all(prompt, "{{task}}", task_to_json(task));
  replace_all(prompt, "{{schema}}", schema_for(task));
  return prompt;
}

ReasonerVerdict RemoteReasoner::reason(const ReasonerTask& task) {
  Url url = split_url(config_.url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.https) throw BackendUnavailable("https endpoints need a build with PRIVFLOW_WITH_TLS");
#endif
  httplib::Client client(url.scheme_host_port);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
  client.set_connection_timeout(std::max<long long>(secs, 1), 0);
  client.set_read_timeout(std::max<long long>(secs, 1), 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  json request = {{"model", config_.model},
                  {"temperature", config_.temperature},
                  {"response_format", {{"type", "json_object"}}},
                  {"messages",
                   json::array({{{"role", "system"}, {"content", system_prompt_}},
                                {{"role", "user"}, {"content", render_prompt(task)}}})}};

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    httplib::Result res;
    for (int tries = 0; tries < 3; ++tries) {
      ++requests_;
      res = client.Post(url.path, headers, request.dump(), "application/json");
      if (res) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50 << tries));
    }
    if (!res) throw BackendUnavailable("cannot reach " + config_.url + ": " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 429) {
      throw BackendUnavailable("backend answered HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) throw BackendUnavailable("backend rejected the request: HTTP " + std::to_string(res->status));
    try {
      json body = json::parse(res->body);
      std::string content = body.at("choices").at(0).at("message").at("content").get<std::string>();
      return parse_verdict(task, content);
    } catch (const SchemaViolation& e) {
      last_error = e.what();
    } catch (const json::exception& e) {
      last_error = std::string("malformed completion: ") + e.what();
    }
    request["messages"].push_back({{"role", "user"},
                                   {"content", "Your previous reply was rejected (" + last_error +
                                                   "). Reply with one JSON object matching: " + schema_for(task)}});
  }
  throw SchemaViolation(last_error + " (after " + std::to_string(config_.max_retries) + " retries)");
}

}  // namespace privflow
