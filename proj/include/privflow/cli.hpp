#pragma once

#include <ostream>

namespace privflow {

/// Entry point of the `privflow` command. Returns the process exit status:
/// 0 clean, 1 findings, 2 configuration or ingest error, 3 budget exhausted.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace privflow
