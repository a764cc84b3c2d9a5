#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace duckling::cli {

enum ExitCode : int {
  kSuccess = 0,
  kValidationError = 1,
  kIoError = 2,
  kComputationError = 3,
};

/// Runs one `duckling` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Inserts `.fold<k>` before the extension: model.json -> model.fold2.json.
std::string fold_path(const std::string& path, int fold);

}  // namespace duckling::cli
