#include <algorithm>
#include <cctype>
#include <set>

#include "privflow/minisrv.hpp"
#include "privflow/reasoner.hpp"

namespace privflow {

std::string_view task_name(const ReasonerTask& task) {
  static constexpr std::string_view names[] = {"ClassifyPrivileged", "ClassifyCheck",     "AssessSufficiency",
                                               "ExtractConstraints", "ConfirmUserSource", "NextSearchAction"};
  return names[task.index()];
}

std::string action_key(const Action& action) {
  std::string key = action.tool;
  for (const auto& [k, v] : action.arguments) key += "|" + k + "=" + v;
  return key;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Text between the first '(' and its matching ')', ignoring string contents.
std::string paren_contents(std::string_view src) {
  auto open = src.find('(');
  if (open == std::string_view::npos) return "";
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < src.size(); ++i) {
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
    if (ch == '(') ++depth;
    if (ch == ')' && --depth == 0) return std::string(src.substr(open + 1, i - open - 1));
  }
  return std::string(src.substr(open + 1));
}

std::string callee_of(std::string_view call_source) {
  auto open = call_source.find('(');
  return trim(call_source.substr(0, open));
}

bool is_noun(const std::vector<std::string>& nouns, const std::string& word) {
  for (const auto& n : nouns) {
    if (word == n || word == n + "s" || word == n + "es") return true;
  }
  return false;
}

std::string first_noun(const std::vector<std::string>& nouns, const std::vector<std::string>& words) {
  for (const auto& w : words) {
    if (is_noun(nouns, w)) return w;
  }
  return "";
}

std::vector<std::string> words_of_all(const std::vector<std::string>& idents) {
  std::vector<std::string> out;
  for (const auto& id : idents) {
    auto w = split_words(id);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string quoted_list(const std::vector<std::string>& items) {
  std::vector<std::string> q;
  for (const auto& i : items) q.push_back("'" + i + "'");
  return join(q, ", ");
}

// Argument identifiers of a call whose words name a protected resource.
std::vector<std::string> resource_arguments(const OracleRules& rules, std::string_view call_source) {
  std::vector<std::string> out;
  for (const auto& id : free_identifiers(paren_contents(call_source))) {
    if (!first_noun(rules.resource_nouns, split_words(id)).empty() &&
        std::find(out.begin(), out.end(), id) == out.end()) {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace

ScriptedOracle::ScriptedOracle(OracleRules rules) : rules_(std::move(rules)) {}

ReasonerVerdict ScriptedOracle::reason(const ReasonerTask& task) {
  return std::visit(
      [this](const auto& t) -> ReasonerVerdict {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, ClassifyPrivileged>) return classify_privileged(t);
        if constexpr (std::is_same_v<T, ClassifyCheck>) return classify_check(t);
        if constexpr (std::is_same_v<T, AssessSufficiency>) return assess(t);
        if constexpr (std::is_same_v<T, ExtractConstraints>) return extract(t);
        if constexpr (std::is_same_v<T, ConfirmUserSource>) return confirm(t);
        if constexpr (std::is_same_v<T, NextSearchAction>) return next_action(t);
      },
      task);
}

std::string ScriptedOracle::verb_regex() const {
  std::vector<std::string> alts;
  for (const auto& v : rules_.privileged_verbs) {
    std::string lower = v.verb;
    lower[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(lower[0])));
    std::string upper = lower;
    upper[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(upper[0])));
    for (const auto& s : {lower, upper}) {
      if (std::find(alts.begin(), alts.end(), s) == alts.end()) alts.push_back(s);
    }
  }
  return ".*(?:" + join(alts, "|") + ").*";
}

PrivilegedClass ScriptedOracle::classify_privileged(const ClassifyPrivileged& t) const {
  std::string name;
  std::vector<std::string> context_words;  // receiver and argument/parameter words
  if (t.kind == "call") {
    std::string callee = callee_of(t.source);
    switch (minisrv::intrinsic_of(callee)) {
      case minisrv::Intrinsic::exec:
        return {PrivCategory::security_critical_action, "'exec' runs an operating-system command"};
      case minisrv::Intrinsic::db_write:
        return {PrivCategory::protected_state, "'db.write' modifies persistent state"};
      case minisrv::Intrinsic::http_post:
      case minisrv::Intrinsic::http_get: {
        auto args = words_of_all(free_identifiers(paren_contents(t.source)));
        for (const auto& w : rules_.credential_words) {
          auto cw = split_words(w);
          if (cw.size() == 1 && std::find(args.begin(), args.end(), cw[0]) != args.end()) {
            return {PrivCategory::sensitive_resource, "'" + callee + "' sends credentials ('" + cw[0] + "') off-service"};
          }
        }
        return {std::nullopt, "'" + callee + "' carries no credentials"};
      }
      case minisrv::Intrinsic::none: break;
      default: return {std::nullopt, "'" + callee + "' is an input or messaging intrinsic"};
    }
    auto dot = callee.rfind('.');
    name = dot == std::string::npos ? callee : callee.substr(dot + 1);
    if (dot != std::string::npos) context_words = split_words(callee.substr(0, dot));
    auto args = words_of_all(free_identifiers(paren_contents(t.source)));
    context_words.insert(context_words.end(), args.begin(), args.end());
  } else {
    name = t.name;
    auto params = words_of_all(free_identifiers(paren_contents(t.source)));
    context_words.insert(context_words.end(), params.begin(), params.end());
  }
  if (name.empty()) return {std::nullopt, "anonymous element"};

  auto words = split_words(name);
  for (const auto& rule : rules_.privileged_verbs) {
    auto vw = split_words(rule.verb);
    if (vw.empty() || vw.size() > words.size() || !std::equal(vw.begin(), vw.end(), words.begin())) continue;
    if (!rule.requires_noun) {
      return {rule.category, "'" + name + "' performs '" + rule.verb + "': " + std::string(to_string(rule.category))};
    }
    std::vector<std::string> rest(words.begin() + static_cast<std::ptrdiff_t>(vw.size()), words.end());
    std::string noun = first_noun(rules_.resource_nouns, rest);
    if (noun.empty()) noun = first_noun(rules_.resource_nouns, context_words);
    if (noun.empty()) continue;
    return {rule.category, "'" + name + "' performs '" + rule.verb + "' on a protected resource ('" + noun +
                               "'): " + std::string(to_string(rule.category))};
  }
  return {std::nullopt, "'" + name + "' matches no privileged verb"};
}

CheckClass ScriptedOracle::classify_check(const ClassifyCheck& t) const {
  std::string label = t.name.empty() ? t.kind : "'" + t.name + "'";
  if (matches_any(rules_.ownership_patterns, t.source)) {
    return {CheckKind::authz, AuthzSubtype::ownership, label + " compares the resource owner with the caller"};
  }
  if (matches_any(rules_.permission_patterns, t.source)) {
    return {CheckKind::authz, AuthzSubtype::permission, label + " checks a permission"};
  }
  if (matches_any(rules_.role_patterns, t.source)) {
    return {CheckKind::authz, AuthzSubtype::role, label + " checks the caller's role"};
  }
  if (matches_any(rules_.authn_patterns, t.source)) {
    return {CheckKind::authn, AuthzSubtype::none, label + " establishes the caller's identity"};
  }
  return {CheckKind::authn, AuthzSubtype::none, label + " gates the request without an authorization rule"};
}

Sufficiency ScriptedOracle::assess(const AssessSufficiency& t) const {
  if (t.checks.empty()) {
    return {SufficiencyVerdict::unprotected, "no authentication or authorization check guards this flow"};
  }
  auto resources = resource_arguments(rules_, t.privop_source);
  std::vector<const CheckSummary*> authz;
  for (const auto& c : t.checks) {
    if (c.kind == CheckKind::authz) authz.push_back(&c);
  }
  if (authz.empty()) {
    std::string why = "only authentication checks guard this flow";
    if (!resources.empty()) {
      why += "; no ownership or authorization check ties " + quoted_list(resources) + " to the caller";
    }
    return {SufficiencyVerdict::missing_authz, why};
  }
  if (resources.empty()) {
    return {SufficiencyVerdict::protected_, "an authorization check guards an operation without resource arguments"};
  }
  for (const auto* c : authz) {
    if (matches_any(rules_.ownership_patterns, c->source)) {
      return {SufficiencyVerdict::protected_, "an ownership comparison guards the operation"};
    }
    auto ids = free_identifiers(c->source);
    for (const auto& r : resources) {
      if (std::find(ids.begin(), ids.end(), r) != ids.end()) {
        return {SufficiencyVerdict::protected_, "an authorization check references '" + r + "'"};
      }
    }
  }
  std::set<std::string> subtypes;
  for (const auto* c : authz) subtypes.insert(std::string(to_string(c->subtype)));
  return {SufficiencyVerdict::insufficient_authz,
          std::to_string(authz.size()) + " authorization check(s) (" +
              join(std::vector<std::string>(subtypes.begin(), subtypes.end()), ", ") + ") never reference " +
              quoted_list(resources) + ", so the caller's eligibility for that specific value is unchecked"};
}

Constraints ScriptedOracle::extract(const ExtractConstraints& t) const {
  Extraction e = extract_guards(t.contexts, t.constants);
  if (const auto* s = std::get_if<Skipped>(&e)) return {e, "skipped: " + s->reason};
  const auto& pc = std::get<PathConstraint>(e);
  std::string rationale = pc.formula.kind == Formula::Kind::true_ ? "no guards on the path" : "guards: " + render(pc.formula);
  return {e, rationale};
}

namespace {

bool segment_prefix(std::string_view prefix, std::string_view path) {
  if (prefix == "/") return true;
  while (prefix.size() > 1 && prefix.back() == '/') prefix.remove_suffix(1);
  if (!path.starts_with(prefix)) return false;
  return path.size() == prefix.size() || path[prefix.size()] == '/';
}

}  // namespace

UserSource ScriptedOracle::confirm(const ConfirmUserSource& t) const {
  for (const auto& r : t.routes) {
    if (r.target == t.service && segment_prefix(r.prefix, t.path)) {
      return {true, "gateway route '" + r.prefix + "' forwards '" + t.path + "' to " + t.service};
    }
  }
  return {false, "no gateway route reaches '" + t.path + "'"};
}

Action ScriptedOracle::next_action(const NextSearchAction& t) const {
  std::set<std::string> done(t.state.history.begin(), t.state.history.end());
  for (const auto& service : t.state.services) {
    Action by_name{"q_name", {{"service", service}, {"pattern", verb_regex()}, {"mode", "regex"}},
                   "look up functions named after privileged verbs in " + service};
    if (!done.contains(action_key(by_name))) return by_name;
    Action by_ast{"q_ast", {{"service", service}, {"kind", "call"}}, "inspect every call site in " + service};
    if (!done.contains(action_key(by_ast))) return by_ast;
  }
  return Action{"finish", {}, "every service has been searched by name and by call sites"};
}

}  // namespace privflow
