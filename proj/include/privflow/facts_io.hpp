#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "privflow/model.hpp"

namespace privflow {

inline constexpr int kFactsVersion = 1;
inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestFileName = "privflow.manifest.json";
inline constexpr std::string_view kFactsExtension = ".facts.jsonl";

/// Reads and validates `privflow.manifest.json`. Throws ManifestError with the
/// offending field path.
Manifest read_manifest(const std::filesystem::path& file);
Manifest parse_manifest(std::string_view json_text);

/// Reads one service from a line-delimited JSON record stream. Fails
/// atomically on the first malformed record (FactsError carries the 1-based
/// line number).
Service read_facts(std::istream& in, std::string_view service_name);

/// Serializes a service: header, element records, edge records, channel
/// records, each group in a deterministic order.
void write_facts(const Service& service, std::ostream& out);
std::string write_facts(const Service& service);

}  // namespace privflow
