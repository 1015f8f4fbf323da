#pragma once

#include <ostream>

namespace stormfield {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

// stormfield simulate|ingest|fit|dic|forecast --config FILE [--seed N] [--out DIR]
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace stormfield
