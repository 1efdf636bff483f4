#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privflow/model.hpp"
#include "privflow/pipeline.hpp"
#include "privflow/reasoner.hpp"

namespace fixture {

std::filesystem::path corpora_root();
std::filesystem::path corpus(const std::string& name);

/// Every directory under corpora/ holding a manifest, sorted.
std::vector<std::string> corpus_names();

/// The rules a scan of this corpus uses: its own oracle.rules.json if present.
privflow::OracleRules rules_for(const std::string& name);

struct Run {
  privflow::Program program;
  privflow::ScanResult result;
  nlohmann::ordered_json report;
};

Run scan_corpus(const std::string& name, privflow::ScanOptions options = {}, privflow::ScanBudget budget = {});

struct Label {
  std::string service;
  std::string sink;
  std::string verdict;
};

struct Labels {
  bool vulnerable = false;
  std::vector<Label> expected;
};

Labels labels_for(const std::string& name);

struct CliRun {
  int status = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

std::string read_file(const std::filesystem::path& p);

}  // namespace fixture
