#pragma once

#include <string>
#include <vector>

namespace seqstory::cli {

/// Exit codes: 0 success, 1 operational failure (structured JSON error on
/// stderr), 2 usage error.
int run(int argc, char** argv);

/// Same as run(argc, argv) with `args` excluding the program name.
int run(const std::vector<std::string>& args);

}  // namespace seqstory::cli
