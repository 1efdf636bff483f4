#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "privflow/model.hpp"
#include "privflow/pipeline.hpp"

namespace privflow {

inline constexpr const char* kReportSchema = "privflow.report";
inline constexpr int kReportVersion = 1;

enum class ReportFormat { json, md };

std::optional<ReportFormat> parse_report_format(std::string_view text);

/// Machine-readable report. Contains no timestamps.
nlohmann::ordered_json report_json(const Program& program, const ScanResult& result);

/// Pretty-printed JSON text with a trailing newline.
std::string render_json(const nlohmann::ordered_json& report);

/// Human-readable report computed from the JSON form only.
std::string render_markdown(const nlohmann::ordered_json& report);

std::string render_report(const Program& program, const ScanResult& result, ReportFormat format);

enum ExitStatus : int { kExitClean = 0, kExitFindings = 1, kExitError = 2, kExitBudget = 3 };

ExitStatus exit_status(const ScanResult& result);

/// One JSON object per line: seq, phase, tool, arguments, results, counted,
/// elapsed_us.
std::string trace_jsonl(const std::vector<TraceEvent>& trace);

}  // namespace privflow
