#include <algorithm>
#include <set>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "default_rules.inc"
#include "privflow/error.hpp"
#include "privflow/reasoner.hpp"

namespace privflow {

using json = nlohmann::json;

std::string_view to_string(PrivCategory c) {
  switch (c) {
    case PrivCategory::sensitive_resource: return "sensitive-resource";
    case PrivCategory::security_critical_action: return "security-critical-action";
    case PrivCategory::protected_state: return "protected-state";
  }
  return "protected-state";
}

std::string_view to_string(CheckKind k) { return k == CheckKind::authn ? "authn" : "authz"; }

std::string_view to_string(AuthzSubtype s) {
  switch (s) {
    case AuthzSubtype::none: return "none";
    case AuthzSubtype::role: return "role";
    case AuthzSubtype::permission: return "permission";
    case AuthzSubtype::ownership: return "ownership";
  }
  return "none";
}

std::string_view to_string(SufficiencyVerdict v) {
  switch (v) {
    case SufficiencyVerdict::protected_: return "protected";
    case SufficiencyVerdict::unprotected: return "unprotected";
    case SufficiencyVerdict::missing_authz: return "missing_authz";
    case SufficiencyVerdict::insufficient_authz: return "insufficient_authz";
  }
  return "unprotected";
}

std::optional<PrivCategory> parse_priv_category(std::string_view text) {
  for (auto c : {PrivCategory::sensitive_resource, PrivCategory::security_critical_action,
                 PrivCategory::protected_state}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<CheckKind> parse_check_kind(std::string_view text) {
  if (text == "authn") return CheckKind::authn;
  if (text == "authz") return CheckKind::authz;
  return std::nullopt;
}

std::optional<AuthzSubtype> parse_authz_subtype(std::string_view text) {
  for (auto s : {AuthzSubtype::none, AuthzSubtype::role, AuthzSubtype::permission, AuthzSubtype::ownership}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<SufficiencyVerdict> parse_sufficiency(std::string_view text) {
  for (auto v : {SufficiencyVerdict::protected_, SufficiencyVerdict::unprotected, SufficiencyVerdict::missing_authz,
                 SufficiencyVerdict::insufficient_authz}) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

std::vector<std::string> split_words(std::string_view name) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    char ch = name[i];
    if (!std::isalnum(static_cast<unsigned char>(ch))) {
      flush();
      continue;
    }
    bool upper = std::isupper(static_cast<unsigned char>(ch));
    if (upper && !cur.empty()) {
      bool prev_lower = std::islower(static_cast<unsigned char>(name[i - 1])) ||
                        std::isdigit(static_cast<unsigned char>(name[i - 1]));
      bool next_lower = i + 1 < name.size() && std::islower(static_cast<unsigned char>(name[i + 1]));
      bool prev_upper = std::isupper(static_cast<unsigned char>(name[i - 1]));
      if (prev_lower || (prev_upper && next_lower)) flush();
    }
    cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  flush();
  return words;
}

std::vector<std::string> free_identifiers(std::string_view src) {
  std::vector<std::string> out;
  char prev_sig = '\0';  // last non-space character before the token
  for (std::size_t i = 0; i < src.size();) {
    char ch = src[i];
    if (ch == '"') {
      ++i;
      while (i < src.size() && src[i] != '"') i += src[i] == '\\' ? 2 : 1;
      ++i;
      prev_sig = '"';
      continue;
    }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      if (prev_sig != '.') out.emplace_back(src.substr(i, j - i));
      prev_sig = 'a';
      i = j;
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(ch))) prev_sig = ch;
    ++i;
  }
  return out;
}

bool matches_any(const std::vector<Pattern>& patterns, std::string_view text) {
  std::string s(text);
  return std::any_of(patterns.begin(), patterns.end(), [&](const Pattern& p) { return std::regex_search(s, p.re); });
}

namespace {

std::vector<std::string> strings(const json& root, const char* key, bool required) {
  std::vector<std::string> out;
  if (!root.contains(key)) {
    if (required) throw RulesError(key, "missing");
    return out;
  }
  const json& arr = root.at(key);
  if (!arr.is_array()) throw RulesError(key, "must be an array of strings");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string() || arr[i].get<std::string>().empty()) {
      throw RulesError(std::string(key) + "[" + std::to_string(i) + "]", "must be a non-empty string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

std::vector<Pattern> patterns(const json& root, const char* key, bool required) {
  std::vector<Pattern> out;
  auto texts = strings(root, key, required);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(Pattern{texts[i], std::regex(texts[i], std::regex::ECMAScript | std::regex::icase)});
    } catch (const std::regex_error& e) {
      throw RulesError(std::string(key) + "[" + std::to_string(i) + "]", std::string("bad pattern: ") + e.what());
    }
  }
  return out;
}

std::vector<VerbRule> verbs(const json& root, bool required) {
  std::vector<VerbRule> out;
  if (!root.contains("privileged_verbs")) {
    if (required) throw RulesError("privileged_verbs", "missing");
    return out;
  }
  const json& arr = root.at("privileged_verbs");
  if (!arr.is_array()) throw RulesError("privileged_verbs", "must be an array");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string field = "privileged_verbs[" + std::to_string(i) + "]";
    const json& v = arr[i];
    if (!v.is_object() || !v.contains("verb") || !v.at("verb").is_string() || v.at("verb").get<std::string>().empty()) {
      throw RulesError(field + ".verb", "missing or empty");
    }
    VerbRule rule;
    rule.verb = v.at("verb").get<std::string>();
    if (!v.contains("category") || !v.at("category").is_string()) throw RulesError(field + ".category", "missing");
    auto cat = parse_priv_category(v.at("category").get<std::string>());
    if (!cat) throw RulesError(field + ".category", "unknown category '" + v.at("category").get<std::string>() + "'");
    rule.category = *cat;
    if (v.contains("requires_noun")) {
      if (!v.at("requires_noun").is_boolean()) throw RulesError(field + ".requires_noun", "must be a boolean");
      rule.requires_noun = v.at("requires_noun").get<bool>();
    }
    out.push_back(std::move(rule));
  }
  return out;
}

template <typename T, typename Key>
void append_unique(std::vector<T>& dst, std::vector<T> src, Key key) {
  for (auto& item : src) {
    bool dup = std::any_of(dst.begin(), dst.end(), [&](const T& d) { return key(d) == key(item); });
    if (!dup) dst.push_back(std::move(item));
  }
}

OracleRules rules_from_json(const json& root, const OracleRules* base) {
  if (!root.is_object()) throw RulesError("$", "must be an object");
  if (root.contains("version") && (!root.at("version").is_number_integer() || root.at("version").get<int>() != 1)) {
    throw RulesError("version", "unsupported version");
  }
  static const std::set<std::string, std::less<>> known = {
      "version", "extends_default", "privileged_verbs", "resource_nouns", "check_name_patterns", "authn_patterns",
      "authz_role_patterns", "authz_permission_patterns", "ownership_patterns", "credential_words"};
  for (const auto& [key, value] : root.items()) {
    if (!known.contains(key)) throw RulesError(key, "unknown key");
  }
  bool required = base == nullptr;
  OracleRules r;
  r.privileged_verbs = verbs(root, required);
  r.resource_nouns = strings(root, "resource_nouns", required);
  r.check_name_patterns = patterns(root, "check_name_patterns", required);
  r.authn_patterns = patterns(root, "authn_patterns", required);
  r.role_patterns = patterns(root, "authz_role_patterns", required);
  r.permission_patterns = patterns(root, "authz_permission_patterns", required);
  r.ownership_patterns = patterns(root, "ownership_patterns", required);
  r.credential_words = strings(root, "credential_words", required);
  for (auto& n : r.resource_nouns) std::transform(n.begin(), n.end(), n.begin(), ::tolower);

  if (base != nullptr) {
    OracleRules merged = *base;
    append_unique(merged.privileged_verbs, std::move(r.privileged_verbs), [](const VerbRule& v) { return v.verb; });
    append_unique(merged.resource_nouns, std::move(r.resource_nouns), [](const std::string& s) { return s; });
    auto text = [](const Pattern& p) { return p.text; };
    append_unique(merged.check_name_patterns, std::move(r.check_name_patterns), text);
    append_unique(merged.authn_patterns, std::move(r.authn_patterns), text);
    append_unique(merged.role_patterns, std::move(r.role_patterns), text);
    append_unique(merged.permission_patterns, std::move(r.permission_patterns), text);
    append_unique(merged.ownership_patterns, std::move(r.ownership_patterns), text);
    append_unique(merged.credential_words, std::move(r.credential_words), [](const std::string& s) { return s; });
    return merged;
  }

  if (r.privileged_verbs.empty()) throw RulesError("privileged_verbs", "must not be empty");
  if (r.resource_nouns.empty()) throw RulesError("resource_nouns", "must not be empty");
  if (r.check_name_patterns.empty()) throw RulesError("check_name_patterns", "must not be empty");
  if (r.authn_patterns.empty()) throw RulesError("authn_patterns", "must not be empty");
  if (r.ownership_patterns.empty()) throw RulesError("ownership_patterns", "must not be empty");
  return r;
}

}  // namespace

OracleRules parse_rules(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw RulesError("$", std::string("invalid JSON: ") + e.what());
  }
  bool extends = false;
  if (root.is_object() && root.contains("extends_default")) {
    if (!root.at("extends_default").is_boolean()) throw RulesError("extends_default", "must be a boolean");
    extends = root.at("extends_default").get<bool>();
  }
  return rules_from_json(root, extends ? &default_rules() : nullptr);
}

OracleRules load_rules(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw RulesError("$", "cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_rules(buf.str());
}

const OracleRules& default_rules() {
  static const OracleRules rules = parse_rules(detail_default_rules_json);
  return rules;
}

}  // namespace privflow
