#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "privflow/code_search.hpp"
#include "privflow/cross_service.hpp"
#include "privflow/error.hpp"
#include "privflow/model.hpp"
#include "privflow/reasoner.hpp"

namespace privflow {

struct ScanBudget {
  std::size_t max_calls_per_phase = 40;
  std::chrono::milliseconds wall_clock{std::chrono::minutes(10)};
  std::size_t max_flows = 10000;
};

inline constexpr const char* kPhaseIdentify = "identify";
inline constexpr const char* kPhaseFlows = "flows";
inline constexpr const char* kPhaseValidate = "validate";

/// Names that mark a function as a check, and ownership comparisons; used to
/// decide which callees and conditionals are worth classifying.
struct CheckVocabulary {
  std::vector<Pattern> check_names;
  std::vector<Pattern> ownership;

  static CheckVocabulary from(const OracleRules& rules);
};

struct ScanOptions {
  bool basic_sink = false;
  bool no_odctx = false;
  std::optional<std::filesystem::path> emit_smt;
  bool parallel = true;
  CheckVocabulary vocabulary = CheckVocabulary::from(default_rules());
};

struct PrivilegedOperation {
  std::string service;
  ElementId element;  // call site
  PrivCategory category = PrivCategory::protected_state;
  std::string rationale;
  bool baseline = false;  // found by the built-in sink scan
};

enum class Attachment { decorator, middleware, inline_ };

std::string_view to_string(Attachment a);

struct CheckFinding {
  std::string service;
  ElementId element;
  CheckKind classification = CheckKind::authn;
  AuthzSubtype subtype = AuthzSubtype::none;
  Attachment attachment = Attachment::decorator;
  std::string rationale;
};

enum class Feasibility { feasible, unknown };

std::string_view to_string(Feasibility f);

struct Evidence {
  std::string service;
  ElementId element;
  std::string source;  // verbatim get_source output
};

/// One segment of a global path: an intra-service flow or a channel crossing.
struct Hop {
  std::string service;  // flow hops
  FlowPath flow;
  std::optional<ChannelEdge> channel;
};

struct Finding {
  GlobalPath path;
  std::vector<Hop> hops;
  PrivilegedOperation privop;
  std::vector<CheckFinding> checks;
  SufficiencyVerdict verdict = SufficiencyVerdict::unprotected;
  std::string rationale;
  Feasibility feasibility = Feasibility::feasible;
  std::string constraint;  // rendered guards, or the skip/unknown reason
  std::vector<Evidence> evidence;
};

struct Funnel {
  std::size_t initial = 0;
  std::size_t pruned = 0;
  std::size_t protected_dropped = 0;
  std::size_t findings = 0;
  std::size_t truncated = 0;
};

struct TraceEvent {
  std::size_t seq = 0;
  std::string phase;
  std::string tool;
  std::vector<std::pair<std::string, std::string>> arguments;
  std::size_t results = 0;
  bool counted = false;
  std::int64_t elapsed_us = 0;
};

struct BudgetUsage {
  std::map<std::string, std::size_t> calls;  // counted calls per phase
  bool exhausted = false;
  std::string reason;
};

class BudgetExhausted : public Error {
 public:
  explicit BudgetExhausted(const std::string& why) : Error("budget exhausted: " + why) {}
};

/// Shared state of one scan: traced, budgeted access to the code-search
/// primitives and the reasoner.
class AnalysisSession {
 public:
  AnalysisSession(const Program& program, Reasoner& reasoner, ScanBudget budget);

  const Program& program() const { return program_; }
  const ScanBudget& budget() const { return budget_; }

  std::vector<const Element*> q_name(const char* phase, const Service& s, const std::string& pattern, NameMode mode);
  std::vector<const Element*> q_ast(const char* phase, const Service& s, ElementKind kind);
  /// Memoized per session; cache hits are neither traced nor counted.
  std::vector<const Element*> q_cg(const char* phase, const Service& s, const ElementId& function,
                                   CgDirection direction, int depth);
  std::string get_source(const char* phase, const Service& s, const ElementId& id);
  void record_flow(const std::string& service, const ElementId& from, const ElementId& to, bool connected);

  ReasonerVerdict reason(const char* phase, const ReasonerTask& task, const ElementId& subject);

  /// Throws BudgetExhausted once the wall-clock limit has passed.
  void check_clock();
  void mark_exhausted(const std::string& why);
  bool exhausted() const { return usage_.exhausted; }

  const std::vector<TraceEvent>& trace() const { return trace_; }
  const BudgetUsage& usage() const { return usage_; }

 private:
  void count(const char* phase);
  TraceEvent& log(const char* phase, std::string tool, std::vector<std::pair<std::string, std::string>> args,
                  std::size_t results, bool counted);

  const Program& program_;
  Reasoner& reasoner_;
  ScanBudget budget_;
  std::chrono::steady_clock::time_point start_;
  std::vector<TraceEvent> trace_;
  BudgetUsage usage_;
  std::map<std::string, std::vector<const Element*>> cg_cache_;
};

/// Reasoner-driven search plus the baseline sink scan. On budget exhaustion the
/// session is flagged and the operations found so far are returned.
std::vector<PrivilegedOperation> find_privileged_ops(AnalysisSession& session, bool basic_sink);

struct CheckContext {
  std::vector<CheckFinding> checks;
  std::vector<Evidence> evidence;
};

/// Functions a path runs through, in path order, as (service, function index).
std::vector<std::pair<const Service*, std::size_t>> path_functions(const Program& program, const GlobalGraph& graph,
                                                                    const GlobalPath& path);

CheckContext locate_checks(AnalysisSession& session, const GlobalGraph& graph, const GlobalPath& path,
                           const ScanOptions& options);

Sufficiency assess_flow(AnalysisSession& session, const PrivilegedOperation& privop, const CheckContext& context);

struct ScanResult {
  ScanOptions options;
  ScanBudget budget;
  std::string reasoner;
  std::vector<PrivilegedOperation> privops;
  Funnel funnel;
  std::vector<Finding> findings;  // sorted by (service, file, line, path id)
  BudgetUsage usage;
  std::vector<std::string> diagnostics;
  std::vector<TraceEvent> trace;
};

/// The whole analysis. Requires validate_program(program) to be empty.
ScanResult scan(const Program& program, Reasoner& reasoner, const ScanBudget& budget, const ScanOptions& options);

}  // namespace privflow
