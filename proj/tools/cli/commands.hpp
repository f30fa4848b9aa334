#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace affect::cli {

/// Process exit statuses, one per failure class.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,       // command line could not be parsed
  kExitValidation = 2,  // bad input: manifest, emotion values, source image, parameters
  kExitPipeline = 3,    // database load or pipeline stage failure
  kExitOutput = 4,      // results could not be written
};

/// Environment variable supplying the default for --db.
inline constexpr const char* kDatabaseEnv = "AFFECT_DB";

/// Runs one command line (argv[0] included). All output goes to `out`/`err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affect::cli
