#pragma once

#include <filesystem>

#include "privflow/model.hpp"

namespace privflow {

/// Builds a Program from a corpus directory holding privflow.manifest.json.
/// MiniSrv sources of one service are lowered together; facts files are read
/// and merged in. Throws ManifestError, ParseError, LoweringError, FactsError,
/// or Error for integrity violations.
Program load_program(const std::filesystem::path& dir);

Program build_program(const Manifest& manifest, const std::filesystem::path& base);

}  // namespace privflow
