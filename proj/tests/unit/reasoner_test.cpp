#include <gtest/gtest.h>

#include <fstream>

#include "corpus.hpp"
#include "privflow/error.hpp"
#include "privflow/reasoner.hpp"

using namespace privflow;

namespace {

const char* kUpdateRole = "fn update_role(username, role) {\n  users.update(username, role)\n}";
const char* kUpdateCall = "update_role(username, role)";

template <class V>
V ask(Reasoner& r, const ReasonerTask& t) {
  return std::get<V>(r.reason(t));
}

std::filesystem::path write_rules(const std::string& text) {
  auto dir = fixture::temp_dir("rules");
  std::ofstream(dir / "r.json") << text;
  return dir / "r.json";
}

}  // namespace

TEST(Words, SplitAndFreeIdentifiers) {
  EXPECT_EQ(split_words("update_role"), (std::vector<std::string>{"update", "role"}));
  EXPECT_EQ(split_words("order_service.paySuccess"), (std::vector<std::string>{"order", "service", "pay", "success"}));
  EXPECT_EQ(split_words("getHTTPResponse"), (std::vector<std::string>{"get", "http", "response"}));
  EXPECT_EQ(free_identifiers("users.update(username, \"role\") == x.y"),
            (std::vector<std::string>{"users", "username", "x"}));
}

TEST(Rules, DefaultsLoadAndCompile) {
  const OracleRules& r = default_rules();
  EXPECT_FALSE(r.privileged_verbs.empty());
  EXPECT_FALSE(r.resource_nouns.empty());
  EXPECT_TRUE(matches_any(r.ownership_patterns, "if order.getUserId().equals(current_user.getId()) {"));
  EXPECT_FALSE(matches_any(r.ownership_patterns, "if user.role == \"admin\" {"));
}

TEST(Rules, Errors) {
  auto field_of = [](const std::string& text) {
    try {
      parse_rules(text);
    } catch (const RulesError& e) {
      return e.field();
    }
    return std::string("<accepted>");
  };
  auto full = nlohmann::json::parse(fixture::read_file(fixture::corpora_root().parent_path() / "config/oracle.rules.json"));
  EXPECT_EQ(field_of(full.dump()), "<accepted>");
  full["privileged_verbs"] = nlohmann::json::array();
  EXPECT_EQ(field_of(full.dump()), "privileged_verbs");
  EXPECT_EQ(field_of(R"({"version":1,"privileged_verbs":[]})"), "resource_nouns");
  EXPECT_NE(field_of(R"({"version":1,"extends_default":true,"authn_patterns":["("]})"), "<accepted>");
  EXPECT_EQ(field_of(R"({"version":1,"extends_default":true,"bogus":[]})"), "bogus");
  EXPECT_NE(field_of("not json"), "<accepted>");
  EXPECT_THROW(load_rules("/nonexistent/rules.json"), RulesError);
}

TEST(Rules, ExtendsDefaultAppends) {
  OracleRules r = load_rules(write_rules(
      R"({"version":1,"extends_default":true,"privileged_verbs":[{"verb":"paySuccess","category":"security-critical-action","requires_noun":false}]})"));
  EXPECT_EQ(r.privileged_verbs.size(), default_rules().privileged_verbs.size() + 1);
  EXPECT_EQ(r.resource_nouns, default_rules().resource_nouns);
}

TEST(Scripted, ClassifyPrivilegedExamples) {
  ScriptedOracle o;
  auto v = ask<PrivilegedClass>(o, ClassifyPrivileged{"e1", "function", "update_role", kUpdateRole});
  EXPECT_EQ(v.category, PrivCategory::protected_state);
  EXPECT_FALSE(v.rationale.empty());
  EXPECT_FALSE(ask<PrivilegedClass>(o, ClassifyPrivileged{"e2", "call", "", "log(\"hello\")"}).category);
  EXPECT_EQ(ask<PrivilegedClass>(o, ClassifyPrivileged{"e3", "call", "", "exec(cmd)"}).category,
            PrivCategory::security_critical_action);
  EXPECT_EQ(ask<PrivilegedClass>(o, ClassifyPrivileged{"e4", "call", "", "db.write(x)"}).category,
            PrivCategory::protected_state);
  EXPECT_EQ(ask<PrivilegedClass>(o, ClassifyPrivileged{"e5", "call", "", "http_post(url, token)"}).category,
            PrivCategory::sensitive_resource);
  EXPECT_FALSE(ask<PrivilegedClass>(o, ClassifyPrivileged{"e6", "call", "", "http_post(url, body)"}).category);
  EXPECT_FALSE(ask<PrivilegedClass>(o, ClassifyPrivileged{"e7", "function", "update_cache", "fn update_cache(x) {}"}).category);
}

TEST(Scripted, CustomVerbFlipsPaySuccess) {
  ClassifyPrivileged task{"e1", "call", "", "order_service.paySuccess(order_no, pay_type)"};
  ScriptedOracle plain;
  EXPECT_FALSE(ask<PrivilegedClass>(plain, task).category);
  ScriptedOracle custom(load_rules(fixture::corpus("case_study") / "oracle.rules.json"));
  EXPECT_EQ(ask<PrivilegedClass>(custom, task).category, PrivCategory::security_critical_action);
}

TEST(Scripted, ClassifyCheckSubtypes) {
  ScriptedOracle o;
  auto own = ask<CheckClass>(o, ClassifyCheck{"c", "conditional", "", "order.getUserId().equals(current_user.getId())"});
  EXPECT_EQ(own.kind, CheckKind::authz);
  EXPECT_EQ(own.subtype, AuthzSubtype::ownership);
  auto role = ask<CheckClass>(o, ClassifyCheck{"c", "function", "can_switch_roles",
                                               "fn can_switch_roles(user) {\n  if user.role == \"admin\" {}\n}"});
  EXPECT_EQ(role.subtype, AuthzSubtype::role);
  auto perm = ask<CheckClass>(o, ClassifyCheck{"c", "function", "has_permission", "fn has_permission(u, p) {}"});
  EXPECT_EQ(perm.subtype, AuthzSubtype::permission);
  auto authn = ask<CheckClass>(o, ClassifyCheck{"c", "function", "verify_jwt", "fn verify_jwt(token) {}"});
  EXPECT_EQ(authn.kind, CheckKind::authn);
  EXPECT_EQ(authn.subtype, AuthzSubtype::none);
}

TEST(Scripted, SufficiencyRule) {
  ScriptedOracle o;
  AssessSufficiency t{"p", kUpdateCall, PrivCategory::protected_state, {}, {}};
  EXPECT_EQ(ask<Sufficiency>(o, t).verdict, SufficiencyVerdict::unprotected);
  t.checks = {CheckSummary{"c1", CheckKind::authn, AuthzSubtype::none, "fn verify_jwt(token) {}"}};
  EXPECT_EQ(ask<Sufficiency>(o, t).verdict, SufficiencyVerdict::missing_authz);
  t.checks.push_back(CheckSummary{"c2", CheckKind::authz, AuthzSubtype::role,
                                  "fn can_switch_roles(user) {\n  if user.role == \"admin\" {}\n}"});
  auto insufficient = ask<Sufficiency>(o, t);
  EXPECT_EQ(insufficient.verdict, SufficiencyVerdict::insufficient_authz);
  EXPECT_NE(insufficient.rationale.find("'role'"), std::string::npos);
  t.checks.push_back(CheckSummary{"c3", CheckKind::authz, AuthzSubtype::role,
                                  "fn can_assign(user, role) {\n  if allowed(user, role) {}\n}"});
  EXPECT_EQ(ask<Sufficiency>(o, t).verdict, SufficiencyVerdict::protected_);
}

TEST(Scripted, ConfirmUserSource) {
  ScriptedOracle o;
  std::vector<GatewayRoute> routes = {{"/api", "gw"}};
  EXPECT_TRUE(ask<UserSource>(o, ConfirmUserSource{"e", "gw", "/api/x", routes}).confirmed);
  EXPECT_FALSE(ask<UserSource>(o, ConfirmUserSource{"e", "gw", "/apix", routes}).confirmed);
  EXPECT_FALSE(ask<UserSource>(o, ConfirmUserSource{"e", "other", "/api/x", routes}).confirmed);
}

TEST(Scripted, EveryVerdictVariantIsProducible) {
  ScriptedOracle o;
  std::set<std::size_t> seen;
  std::vector<ReasonerTask> tasks = {
      ClassifyPrivileged{"e", "function", "update_role", kUpdateRole},
      ClassifyCheck{"e", "function", "verify_jwt", "fn verify_jwt(token) {}"},
      AssessSufficiency{"p", kUpdateCall, PrivCategory::protected_state, {}, {}},
      ExtractConstraints{{"a"}, {}, {}},
      ConfirmUserSource{"e", "gw", "/x", {}},
      NextSearchAction{SearchState{{"svc"}, 1, 0, {}}, {}},
  };
  for (const auto& t : tasks) {
    ReasonerVerdict v = o.reason(t);
    EXPECT_EQ(v.index(), t.index());
    seen.insert(v.index());
  }
  EXPECT_EQ(seen.size(), std::variant_size_v<ReasonerVerdict>);
}

TEST(Scripted, SearchWalksServicesThenFinishes) {
  ScriptedOracle o;
  SearchState st{{"a", "b"}, 1, 0, {}};
  std::vector<std::string> tools;
  for (int i = 0; i < 10; ++i) {
    Action a = ask<Action>(o, NextSearchAction{st, {}});
    tools.push_back(a.tool + (a.arguments.contains("service") ? ":" + a.arguments["service"] : ""));
    if (a.finish()) break;
    st.history.push_back(action_key(a));
  }
  EXPECT_EQ(tools, (std::vector<std::string>{"q_name:a", "q_ast:a", "q_name:b", "q_ast:b", "finish"}));
}

TEST(Scripted, Deterministic) {
  ScriptedOracle a, b;
  ReasonerTask t = AssessSufficiency{"p", kUpdateCall, PrivCategory::protected_state,
                                     {CheckSummary{"c", CheckKind::authz, AuthzSubtype::role, "user.role == \"x\""}}, {}};
  EXPECT_EQ(std::get<Sufficiency>(a.reason(t)).rationale, std::get<Sufficiency>(b.reason(t)).rationale);
  EXPECT_EQ(task_to_json(t), task_to_json(t));
}

TEST(ParseVerdict, ValidAndInvalidReplies) {
  ReasonerTask pc = ClassifyPrivileged{"e", "function", "f", "fn f() {}"};
  auto v = std::get<PrivilegedClass>(
      parse_verdict(pc, R"(Sure: {"category": "protected-state", "rationale": "writes"} ok)"));
  EXPECT_EQ(v.category, PrivCategory::protected_state);
  EXPECT_THROW(parse_verdict(pc, "no json here"), SchemaViolation);
  EXPECT_THROW(parse_verdict(pc, R"({"category": "nope", "rationale": "x"})"), SchemaViolation);

  ReasonerTask cc = ClassifyCheck{"e", "function", "f", "fn f() {}"};
  EXPECT_THROW(parse_verdict(cc, R"({"classification": "authn", "authz_subtype": "role", "rationale": "x"})"),
               SchemaViolation);
  auto c = std::get<CheckClass>(parse_verdict(cc, R"({"classification": "authz", "authz_subtype": "role", "rationale": "x"})"));
  EXPECT_EQ(c.subtype, AuthzSubtype::role);

  ReasonerTask na = NextSearchAction{SearchState{{"s"}, 1, 0, {}}, {}};
  EXPECT_THROW(parse_verdict(na, R"({"tool": "rm", "arguments": {}, "rationale": "x"})"), SchemaViolation);
  EXPECT_TRUE(std::get<Action>(parse_verdict(na, R"({"tool": "finish", "arguments": {}, "rationale": "done"})")).finish());
}

TEST(ParseVerdict, ConstraintsReply) {
  ReasonerTask ec = ExtractConstraints{{"a"}, {}, {}};
  auto c = std::get<Constraints>(parse_verdict(ec, R"({
    "skipped": false,
    "variables": [{"name": "mode", "type": "string"}],
    "atoms": [{"lhs": {"var": "mode"}, "op": "==", "rhs": {"string": "A"}}],
    "rationale": "one guard"})"));
  const auto& pc = std::get<PathConstraint>(c.result);
  EXPECT_EQ(pc.variables.size(), 1u);
  EXPECT_THROW(parse_verdict(ec, R"({"skipped": false, "variables": [],
    "atoms": [{"lhs": {"var": "mode"}, "op": "==", "rhs": {"string": "A"}}], "rationale": "x"})"),
               SchemaViolation);
  auto skipped = std::get<Constraints>(parse_verdict(ec, R"({"skipped": true, "reason": "helper call"})"));
  EXPECT_TRUE(std::holds_alternative<Skipped>(skipped.result));
}
