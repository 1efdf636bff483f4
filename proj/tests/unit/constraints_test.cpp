#include <gtest/gtest.h>

#include "oracles.hpp"
#include "privflow/constraints.hpp"
#include "privflow/error.hpp"

using namespace privflow;

namespace {

PathConstraint ints(std::vector<std::string> names, Formula f) {
  PathConstraint c;
  for (auto& n : names) c.variables.push_back(Variable{n, VarType::int_});
  c.formula = std::move(f);
  return c;
}

Formula eq(const std::string& v, std::int64_t k) { return Formula::compare(Term::var(v), CmpOp::eq, Term::integer(k)); }

GuardContext context(const std::string& source, std::vector<Location> nodes) {
  return GuardContext{"jobs", "run_job", source, Location{"run.msv", 1, 1}, std::move(nodes)};
}

const char* kNested =
    "fn run_job(request) {\n"
    "  mode = request.param(\"mode\")\n"
    "  if mode == \"A\" {\n"
    "    if mode == \"B\" {\n"
    "      exec(mode)\n"
    "    }\n"
    "  }\n"
    "}";

}  // namespace

TEST(Sat, ContradictionIsUnsat) {
  auto c = ints({"x"}, Formula::conj({eq("x", 1), eq("x", 2)}));
  EXPECT_TRUE(std::holds_alternative<Unsat>(check_sat(c)));
}

TEST(Sat, TruthIsSat) {
  PathConstraint c;
  auto r = check_sat(c);
  ASSERT_TRUE(std::holds_alternative<Sat>(r));
  EXPECT_TRUE(eval_witness(c, std::get<Sat>(r).witness));
}

TEST(Sat, WitnessSatisfiesMixedSorts) {
  PathConstraint c;
  c.variables = {{"n", VarType::int_}, {"s", VarType::string}, {"t", VarType::string}, {"b", VarType::bool_}};
  c.formula = Formula::conj({
      Formula::compare(Term::var("n"), CmpOp::gt, Term::integer(3)),
      Formula::compare(Term::integer(6), CmpOp::gt, Term::var("n")),
      Formula::compare(Term::var("n"), CmpOp::ne, Term::integer(4)),
      Formula::compare(Term::var("s"), CmpOp::ne, Term::string("admin")),
      Formula::compare(Term::var("s"), CmpOp::ne, Term::var("t")),
      Formula::negation(Formula::boolean("b")),
  });
  auto r = check_sat(c);
  ASSERT_TRUE(std::holds_alternative<Sat>(r));
  const auto& w = std::get<Sat>(r).witness;
  EXPECT_EQ(std::get<std::int64_t>(w.at("n")), 5);
  EXPECT_NE(std::get<std::string>(w.at("s")), "admin");
  EXPECT_NE(std::get<std::string>(w.at("s")), std::get<std::string>(w.at("t")));
  EXPECT_FALSE(std::get<bool>(w.at("b")));
  EXPECT_TRUE(eval_witness(c, w));
  EXPECT_TRUE(oracle::evaluate(c.formula, w));
}

TEST(Sat, StringEqualityChainsAreUnsat) {
  PathConstraint c;
  c.variables = {{"a", VarType::string}, {"b", VarType::string}};
  c.formula = Formula::conj({Formula::compare(Term::var("a"), CmpOp::eq, Term::var("b")),
                             Formula::compare(Term::var("a"), CmpOp::eq, Term::string("x")),
                             Formula::compare(Term::var("b"), CmpOp::eq, Term::string("y"))});
  EXPECT_TRUE(std::holds_alternative<Unsat>(check_sat(c)));
}

TEST(Sat, TinyLimitsGiveUnknownNotUnsat) {
  std::vector<Formula> parts;
  for (int i = 0; i < 14; ++i) {
    std::string v = "x" + std::to_string(i);
    parts.push_back(Formula::disj({eq(v, 0), eq(v, 1)}));
  }
  std::vector<std::string> names;
  for (int i = 0; i < 14; ++i) names.push_back("x" + std::to_string(i));
  auto c = ints(names, Formula::conj(parts));
  auto r = check_sat(c, SatLimits{4, 10});
  EXPECT_FALSE(std::holds_alternative<Unsat>(r));
}

TEST(Eval, Examples) {
  auto c = ints({"x"}, Formula::disj({eq("x", 1), eq("x", 2)}));
  EXPECT_TRUE(eval_witness(c, {{"x", std::int64_t{2}}}));
  EXPECT_FALSE(eval_witness(c, {{"x", std::int64_t{3}}}));
  EXPECT_THROW(eval_witness(c, {}), MissingVariable);
}

TEST(Validate, Errors) {
  EXPECT_THROW(validate(ints({}, eq("x", 1))), ConstraintError);
  PathConstraint mixed;
  mixed.variables = {{"s", VarType::string}};
  mixed.formula = Formula::compare(Term::var("s"), CmpOp::eq, Term::integer(1));
  EXPECT_THROW(validate(mixed), ConstraintError);
  PathConstraint ordered;
  ordered.variables = {{"s", VarType::string}};
  ordered.formula = Formula::compare(Term::var("s"), CmpOp::lt, Term::string("a"));
  EXPECT_THROW(validate(ordered), ConstraintError);
  PathConstraint twovars = ints({"a", "b"}, Formula::compare(Term::var("a"), CmpOp::lt, Term::var("b")));
  EXPECT_THROW(validate(twovars), ConstraintError);
  PathConstraint boolcmp;
  boolcmp.variables = {{"b", VarType::bool_}};
  boolcmp.formula = Formula::compare(Term::var("b"), CmpOp::eq, Term::integer(1));
  EXPECT_THROW(validate(boolcmp), ConstraintError);
  EXPECT_NO_THROW(validate(ints({"x"}, eq("x", 1))));
}

TEST(Smt, SingleEquality) {
  auto text = emit_smtlib(ints({"x"}, eq("x", 1)));
  EXPECT_EQ(text, "(declare-const x Int)\n(assert (= x 1))\n(check-sat)\n");
}

TEST(Smt, ConjunctsAndQuoting) {
  PathConstraint c;
  c.variables = {{"svc/f.mode", VarType::string}, {"b", VarType::bool_}, {"n", VarType::int_}, {"2x", VarType::int_}};
  c.formula = Formula::conj({Formula::compare(Term::var("svc/f.mode"), CmpOp::ne, Term::string("say \"hi\"")),
                             Formula::compare(Term::var("2x"), CmpOp::eq, Term::var("n")),
                             Formula::negation(Formula::boolean("b")),
                             Formula::compare(Term::var("n"), CmpOp::ge, Term::integer(-3))});
  auto text = emit_smtlib(c);
  EXPECT_EQ(oracle::smtlib_problem(text), "") << text;
  EXPECT_NE(text.find("(declare-const svc/f.mode String)"), std::string::npos);
  EXPECT_NE(text.find("(declare-const |2x| Int)"), std::string::npos);
  EXPECT_NE(text.find("(- 3)"), std::string::npos);
  EXPECT_NE(text.find("\"say \"\"hi\"\"\""), std::string::npos);
  // Declarations sorted, one assert per conjunct.
  EXPECT_LT(text.find("declare-const b"), text.find("declare-const n"));
  std::size_t asserts = 0;
  for (std::size_t p = text.find("(assert"); p != std::string::npos; p = text.find("(assert", p + 1)) ++asserts;
  EXPECT_EQ(asserts, 4u);
  EXPECT_EQ(text, emit_smtlib(c));
}

TEST(Smt, EmptyConjunction) {
  auto text = emit_smtlib(PathConstraint{});
  EXPECT_EQ(oracle::smtlib_problem(text), "") << text;
  EXPECT_NE(text.find("(check-sat)"), std::string::npos);
}

TEST(Render, Infix) {
  EXPECT_EQ(render(Formula::conj({eq("x", 1), Formula::boolean("b")})), "x == 1 && b");
}

TEST(Guards, NestedModes) {
  auto r = extract_guards({context(kNested, {Location{"run.msv", 5, 7}})}, {});
  ASSERT_TRUE(std::holds_alternative<PathConstraint>(r));
  auto c = std::get<PathConstraint>(r);
  ASSERT_EQ(c.formula.kind, Formula::Kind::and_);
  EXPECT_EQ(c.formula.children.size(), 2u);
  ASSERT_EQ(c.variables.size(), 1u);
  EXPECT_EQ(c.variables[0].name, "jobs/run_job.mode");
  EXPECT_EQ(c.variables[0].type, VarType::string);
  EXPECT_TRUE(std::holds_alternative<Unsat>(check_sat(c)));
}

TEST(Guards, ElseBranchIsNegated) {
  const char* src =
      "fn run_job(n) {\n"
      "  if n > 3 {\n"
      "    log(n)\n"
      "  } else {\n"
      "    exec(n)\n"
      "  }\n"
      "}";
  auto c = std::get<PathConstraint>(extract_guards({context(src, {Location{"run.msv", 5, 5}})}, {}));
  EXPECT_EQ(c.formula.kind, Formula::Kind::not_);
  EXPECT_FALSE(eval_witness(c, {{"jobs/run_job.n", std::int64_t{4}}}));
  EXPECT_TRUE(eval_witness(c, {{"jobs/run_job.n", std::int64_t{3}}}));
}

TEST(Guards, ConstantsFold) {
  const char* src =
      "fn run_job(n) {\n"
      "  if n == LIMIT {\n"
      "    exec(n)\n"
      "  }\n"
      "}";
  auto c = std::get<PathConstraint>(
      extract_guards({context(src, {Location{"run.msv", 3, 5}})}, {{"jobs", {"const LIMIT = 7"}}}));
  EXPECT_EQ(c.formula, eq("jobs/run_job.n", 7));
}

TEST(Guards, HelperCallIsSkipped) {
  const char* src =
      "fn run_job(u) {\n"
      "  if is_admin(u) {\n"
      "    exec(u)\n"
      "  }\n"
      "}";
  auto r = extract_guards({context(src, {Location{"run.msv", 3, 5}})}, {});
  ASSERT_TRUE(std::holds_alternative<Skipped>(r));
  EXPECT_NE(std::get<Skipped>(r).reason.find("is_admin"), std::string::npos);
}

TEST(Guards, ReassignedVariableIsSkipped) {
  const char* src =
      "fn run_job(u) {\n"
      "  u = 2\n"
      "  if u == 1 {\n"
      "    exec(u)\n"
      "  }\n"
      "}";
  EXPECT_TRUE(std::holds_alternative<Skipped>(extract_guards({context(src, {Location{"run.msv", 4, 5}})}, {})));
}

TEST(Guards, NoConditionalsGiveTruth) {
  const char* src = "fn run_job(u) {\n  exec(u)\n}";
  auto c = std::get<PathConstraint>(extract_guards({context(src, {Location{"run.msv", 2, 3}})}, {}));
  EXPECT_EQ(c.formula, Formula::truth(true));
  EXPECT_TRUE(c.variables.empty());
}

TEST(SatProperty, AgreesWithEnumeration) {
  oracle::Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    auto c = oracle::random_constraint(rng);
    ASSERT_NO_THROW(validate(c));
    auto expected = oracle::enumerate_model(c);
    auto r = check_sat(c);
    if (auto* s = std::get_if<Sat>(&r)) {
      EXPECT_TRUE(eval_witness(c, s->witness)) << render(c.formula);
      EXPECT_TRUE(oracle::evaluate(c.formula, s->witness)) << render(c.formula);
      EXPECT_TRUE(expected.has_value()) << render(c.formula);
    } else if (std::holds_alternative<Unsat>(r)) {
      EXPECT_FALSE(expected.has_value()) << render(c.formula);
    }
    EXPECT_EQ(oracle::smtlib_problem(emit_smtlib(c)), "");
  }
}
