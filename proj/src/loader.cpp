#include "privflow/loader.hpp"

#include <fstream>
#include <sstream>

#include "privflow/error.hpp"
#include "privflow/facts_io.hpp"
#include "privflow/minisrv.hpp"

namespace privflow {

namespace {

std::string slurp(const std::filesystem::path& file, const std::string& field) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ManifestError(field, "cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Service load_service(const ManifestService& ms, std::size_t position, const std::filesystem::path& base) {
  std::string field = "services[" + std::to_string(position) + "]";
  std::vector<minisrv::Ast> asts;
  for (const auto& src : ms.sources) {
    asts.push_back(minisrv::parse_source(slurp(base / src, field + ".sources"), ms.name, src));
  }
  Service lowered = asts.empty() ? Service(ms.name, {}, {}) : minisrv::lower(asts, ms.name);

  std::vector<Element> elements(lowered.elements().begin(), lowered.elements().end());
  std::vector<Edge> edges(lowered.edges().begin(), lowered.edges().end());
  std::vector<Channel> channels;
  for (const auto& f : ms.facts) {
    std::ifstream in(base / f, std::ios::binary);
    if (!in) throw ManifestError(field + ".facts", "cannot read " + (base / f).string());
    Service part;
    try {
      part = read_facts(in, ms.name);
    } catch (const FactsError& e) {
      throw FactsError(e.line(), f + ": " + e.reason());
    }
    elements.insert(elements.end(), part.elements().begin(), part.elements().end());
    edges.insert(edges.end(), part.edges().begin(), part.edges().end());
    channels.insert(channels.end(), part.supplied_channels().begin(), part.supplied_channels().end());
  }
  return Service(ms.name, std::move(elements), std::move(edges), std::move(channels), ms.entry);
}

}  // namespace

Program build_program(const Manifest& manifest, const std::filesystem::path& base) {
  Program program;
  program.manifest = manifest;
  for (std::size_t i = 0; i < manifest.services.size(); ++i) {
    program.services.push_back(load_service(manifest.services[i], i, base));
  }
  auto violations = validate_program(program);
  if (!violations.empty()) {
    std::string msg = "integrity: " + describe(violations.front());
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw Error(msg);
  }
  return program;
}

Program load_program(const std::filesystem::path& dir) {
  auto manifest_path = dir / kManifestFileName;
  if (!std::filesystem::exists(manifest_path)) {
    throw ManifestError("$", "no " + std::string(kManifestFileName) + " in " + dir.string());
  }
  return build_program(read_manifest(manifest_path), dir);
}

}  // namespace privflow
