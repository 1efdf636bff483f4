#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "corpus.hpp"
#include "privflow/facts_io.hpp"
#include "privflow/loader.hpp"
#include "privflow/report.hpp"

using namespace privflow;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string dir(const std::string& name) { return fixture::corpus(name).string(); }

std::vector<json> lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(fixture::run({"scan", dir("role_update")}).status, 1);
  EXPECT_EQ(fixture::run({"scan", dir("role_update_patched")}).status, 0);
  auto missing = fixture::run({"scan", fixture::temp_dir("nomanifest").string()});
  EXPECT_EQ(missing.status, 2);
  EXPECT_NE(missing.err.find("privflow: error:"), std::string::npos);
  EXPECT_EQ(fixture::run({"scan", dir("role_update"), "--no-such-flag"}).status, 2);
  EXPECT_EQ(fixture::run({"scan", dir("role_update"), "--format", "xml"}).status, 2);
  EXPECT_EQ(fixture::run({}).status, 2);
  auto help = fixture::run({"--help"});
  EXPECT_EQ(help.status, 0);
  EXPECT_NE(help.out.find("scan"), std::string::npos);
}

TEST(Cli, BudgetExhaustionExitsThree) {
  EXPECT_EQ(fixture::run({"scan", dir("role_update"), "--budget-calls", "1"}).status, 3);
}

TEST(Cli, MarkdownReport) {
  auto r = fixture::run({"scan", dir("role_update"), "--format", "md"});
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("/setUserRole"), std::string::npos);
  EXPECT_NE(r.out.find("insufficient_authz"), std::string::npos);
}

TEST(Cli, OutputFile) {
  auto tmp = fixture::temp_dir("out");
  auto file = tmp / "report.json";
  auto r = fixture::run({"scan", dir("role_update"), "-o", file.string()});
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(fixture::read_file(file), fixture::run({"scan", dir("role_update")}).out);
}

TEST(Report, JsonFixpoint) {
  for (const auto& name : fixture::corpus_names()) {
    auto run = fixture::scan_corpus(name);
    std::string text = render_json(run.report);
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(render_json(ordered_json::parse(text)), text) << name;
    EXPECT_EQ(run.report["schema"], kReportSchema);
    EXPECT_EQ(run.report["findings"].size(), run.result.findings.size());
    // Markdown depends on the JSON form only.
    EXPECT_EQ(render_markdown(ordered_json::parse(text)), render_markdown(run.report)) << name;
  }
}

TEST(Report, EmptyFindingsArray) {
  auto run = fixture::scan_corpus("role_update_patched");
  EXPECT_NE(render_json(run.report).find("\"findings\": []"), std::string::npos);
  EXPECT_EQ(exit_status(run.result), kExitClean);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::md);
  EXPECT_FALSE(parse_report_format("html").has_value());
}

TEST(Report, NoTimestamps) {
  auto a = fixture::run({"scan", dir("case_study")});
  auto b = fixture::run({"scan", dir("case_study")});
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, QueryName) {
  auto r = fixture::run({"query", dir("role_update"), "--service", "usermgmt", "--op", "name", "--pattern", "update_role"});
  EXPECT_EQ(r.status, 0);
  auto rows = lines(r.out);
  ASSERT_FALSE(rows.empty());
  for (const auto& row : rows) {
    EXPECT_EQ(row["name"], "update_role");
    for (const char* k : {"id", "kind", "file", "line", "col", "type", "source"}) EXPECT_TRUE(row.contains(k)) << k;
  }
}

TEST(Cli, QueryCgAndFlow) {
  auto cg = fixture::run(
      {"query", dir("role_update"), "--service", "usermgmt", "--op", "cg", "--function", "update_role", "--direction",
       "callers", "--depth", "1"});
  EXPECT_EQ(cg.status, 0);
  auto rows = lines(cg.out);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0]["name"], "set_user_role");

  auto flow = fixture::run({"query", dir("role_update"), "--service", "usermgmt", "--op", "flow", "--from", "role",
                            "--to", "update_role"});
  EXPECT_EQ(flow.status, 0);
  auto paths = lines(flow.out);
  ASSERT_FALSE(paths.empty());
  EXPECT_EQ(paths[0]["hops"].back(), "parameter_of");
  EXPECT_EQ(paths[0]["nodes"].size(), paths[0]["hops"].size() + 1);
}

TEST(Cli, QueryErrors) {
  EXPECT_EQ(fixture::run({"query", dir("role_update"), "--service", "nope", "--op", "ast", "--kind", "call"}).status, 2);
  EXPECT_EQ(fixture::run({"query", dir("role_update"), "--service", "usermgmt", "--op", "ast", "--kind", "bogus"}).status, 2);
  EXPECT_EQ(fixture::run({"query", dir("role_update"), "--service", "usermgmt", "--op", "name", "--pattern", "(",
                          "--mode", "regex"})
                .status,
            2);
}

TEST(Cli, GraphDot) {
  auto r = fixture::run({"graph", dir("role_update")});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("digraph", 0), 0u);
  EXPECT_NE(r.out.find("/setUserRole"), std::string::npos);
}

TEST(Cli, FactsExportLoadsBack) {
  auto out = fixture::temp_dir("facts");
  auto r = fixture::run({"facts", dir("role_update"), "--out", out.string()});
  EXPECT_EQ(r.status, 0);
  Program p = load_program(fixture::corpus("role_update"));
  for (const auto& s : p.services) {
    std::ifstream in(out / (s.name() + ".facts.jsonl"));
    ASSERT_TRUE(in.good()) << s.name();
    Service back = read_facts(in, s.name());
    EXPECT_TRUE(back.with_entry(s.entry()) == s) << s.name();
  }
}

TEST(Cli, TraceJsonLines) {
  auto tmp = fixture::temp_dir("trace");
  auto file = tmp / "trace.jsonl";
  fixture::run({"scan", dir("role_update"), "--trace", file.string()});
  auto rows = lines(fixture::read_file(file));
  ASSERT_FALSE(rows.empty());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["seq"], i + 1);
    for (const char* k : {"phase", "tool", "arguments", "results", "counted", "elapsed_us"})
      EXPECT_TRUE(rows[i].contains(k)) << k;
  }
}
