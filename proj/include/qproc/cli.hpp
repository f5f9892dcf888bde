#pragma once

// Command-line front end.
//
//   qproc check FILE
//   qproc run   FILE [--entry N] [--seed S] [--policy first|uniform] [--max-steps K] [--open]
//   qproc tree  FILE [--max-depth D] [--max-nodes K] [--format dot|json|text]
//   qproc dist  FILE [--policy P] [--max-depth D] [--max-nodes K] [--format text|json]
//
// Common: --defs FILE (or $QPROC_DEFS), --format, --verbose.

#include <iosfwd>
#include <string>
#include <vector>

namespace qproc::cli {

enum ExitCode : int {
    kOk = 0,
    kInvalidProgram = 1, ///< syntax, elaboration, definitions file, unknown entry
    kIo = 2,
    kStuck = 3,
    kTruncated = 4,
    kOpenAction = 5,
    kRuntime = 6,
    kUsage = 64,
};

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace qproc::cli
