#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "privflow/constraints.hpp"
#include "privflow/model.hpp"

namespace privflow {

enum class PrivCategory { sensitive_resource, security_critical_action, protected_state };
enum class CheckKind { authn, authz };
enum class AuthzSubtype { none, role, permission, ownership };
enum class SufficiencyVerdict { protected_, unprotected, missing_authz, insufficient_authz };

std::string_view to_string(PrivCategory c);
std::string_view to_string(CheckKind k);
std::string_view to_string(AuthzSubtype s);
std::string_view to_string(SufficiencyVerdict v);
std::optional<PrivCategory> parse_priv_category(std::string_view text);
std::optional<CheckKind> parse_check_kind(std::string_view text);
std::optional<AuthzSubtype> parse_authz_subtype(std::string_view text);
std::optional<SufficiencyVerdict> parse_sufficiency(std::string_view text);

// ---------------------------------------------------------------------------
// Tasks. Every task is plain serialized data.

struct ClassifyPrivileged {
  ElementId element;
  std::string kind;    // "function" or "call"
  std::string name;    // function name; empty for call sites
  std::string source;  // verbatim source
};

struct ClassifyCheck {
  ElementId element;
  std::string kind;  // element kind of the check (function, decorator, conditional)
  std::string name;
  std::string source;
};

struct CheckSummary {
  ElementId element;
  CheckKind kind = CheckKind::authn;
  AuthzSubtype subtype = AuthzSubtype::none;
  std::string source;
};

struct AssessSufficiency {
  ElementId privop;
  std::string privop_source;
  PrivCategory category = PrivCategory::protected_state;
  std::vector<CheckSummary> checks;
  std::vector<std::string> contexts;
};

struct ExtractConstraints {
  std::vector<ElementId> path;
  std::vector<GuardContext> contexts;
  std::map<std::string, std::vector<std::string>> constants;  // by service
};

struct ConfirmUserSource {
  ElementId endpoint;
  std::string service;
  std::string path;
  std::vector<GatewayRoute> routes;
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<std::string> arguments;
};

struct SearchState {
  std::vector<std::string> services;
  std::size_t round = 1;
  std::size_t ops_found = 0;
  /// action_key() of every action already issued.
  std::vector<std::string> history;
};

struct NextSearchAction {
  SearchState state;
  std::vector<ToolSchema> tools;
};

using ReasonerTask =
    std::variant<ClassifyPrivileged, ClassifyCheck, AssessSufficiency, ExtractConstraints, ConfirmUserSource,
                 NextSearchAction>;

std::string_view task_name(const ReasonerTask& task);

// ---------------------------------------------------------------------------
// Verdicts, one per task in the same order.

struct PrivilegedClass {
  std::optional<PrivCategory> category;  // nullopt: not privileged
  std::string rationale;
};

struct CheckClass {
  CheckKind kind = CheckKind::authn;
  AuthzSubtype subtype = AuthzSubtype::none;
  std::string rationale;
};

struct Sufficiency {
  SufficiencyVerdict verdict = SufficiencyVerdict::unprotected;
  std::string rationale;
};

struct Constraints {
  Extraction result;
  std::string rationale;
};

struct UserSource {
  bool confirmed = false;
  std::string rationale;
};

struct Action {
  std::string tool;  // "q_name", "q_ast" or "finish"
  std::map<std::string, std::string> arguments;
  std::string rationale;

  bool finish() const { return tool == "finish"; }
};

/// Canonical "tool|key=value|..." spelling, used in SearchState::history.
std::string action_key(const Action& action);

using ReasonerVerdict = std::variant<PrivilegedClass, CheckClass, Sufficiency, Constraints, UserSource, Action>;

// ---------------------------------------------------------------------------
// Rules for the scripted oracle.

struct VerbRule {
  std::string verb;  // matched as a word-sequence prefix of a name
  PrivCategory category = PrivCategory::protected_state;
  bool requires_noun = true;
};

struct Pattern {
  std::string text;
  std::regex re;
};

struct OracleRules {
  std::vector<VerbRule> privileged_verbs;
  std::vector<std::string> resource_nouns;
  std::vector<Pattern> check_name_patterns;
  std::vector<Pattern> authn_patterns;
  std::vector<Pattern> role_patterns;
  std::vector<Pattern> permission_patterns;
  std::vector<Pattern> ownership_patterns;
  std::vector<std::string> credential_words;
};

/// Reads a rules file. With "extends_default": true the file's lists are
/// appended to the shipped defaults. Throws RulesError.
OracleRules load_rules(const std::filesystem::path& file);
OracleRules parse_rules(std::string_view json_text);
const OracleRules& default_rules();

/// Lower-case words of an identifier or dotted name: snake_case, camelCase
/// and dots all split.
std::vector<std::string> split_words(std::string_view name);

/// Identifier tokens of a source text, skipping string literals and member
/// names (tokens right after '.').
std::vector<std::string> free_identifiers(std::string_view source);

bool matches_any(const std::vector<Pattern>& patterns, std::string_view text);

// ---------------------------------------------------------------------------
// Backends

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual ReasonerVerdict reason(const ReasonerTask& task) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic rules-driven backend.
class ScriptedOracle final : public Reasoner {
 public:
  explicit ScriptedOracle(OracleRules rules = default_rules());

  ReasonerVerdict reason(const ReasonerTask& task) override;
  std::string name() const override { return "scripted"; }

  const OracleRules& rules() const { return rules_; }

  /// Pattern q_name is asked with: every verb in any letter case position.
  std::string verb_regex() const;

 private:
  PrivilegedClass classify_privileged(const ClassifyPrivileged& t) const;
  CheckClass classify_check(const ClassifyCheck& t) const;
  Sufficiency assess(const AssessSufficiency& t) const;
  Constraints extract(const ExtractConstraints& t) const;
  UserSource confirm(const ConfirmUserSource& t) const;
  Action next_action(const NextSearchAction& t) const;

  OracleRules rules_;
};

struct RemoteConfig {
  std::string url;  // chat-completions endpoint, http:// or https://
  std::string model = "gpt-4o";
  double temperature = 0.2;
  std::string api_key_env = "PRIVFLOW_API_KEY";
  std::filesystem::path prompts_dir;
  int max_retries = 3;  // additional attempts after a malformed reply
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-compatible chat-completion client. Every reply must be a JSON object
/// matching the task's verdict schema.
class RemoteReasoner final : public Reasoner {
 public:
  explicit RemoteReasoner(RemoteConfig config);
  ~RemoteReasoner() override;

  ReasonerVerdict reason(const ReasonerTask& task) override;
  std::string name() const override { return "remote"; }

  std::size_t requests_sent() const { return requests_; }

 private:
  std::string render_prompt(const ReasonerTask& task) const;

  RemoteConfig config_;
  std::string system_prompt_;
  std::map<std::string, std::string> templates_;
  std::size_t requests_ = 0;
};

/// Parses a backend reply for `task`. Throws SchemaViolation when the reply
/// does not fit the schema.
ReasonerVerdict parse_verdict(const ReasonerTask& task, std::string_view reply);

/// JSON text describing a task, used in prompts.
std::string task_to_json(const ReasonerTask& task);

}  // namespace privflow
