#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jexpand::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kIo = 3 };

/// Runs one `jexpand` command line. Normal output goes to `out`, errors to
/// `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace jexpand::cli
