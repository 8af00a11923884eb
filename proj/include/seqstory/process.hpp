#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seqstory {

struct ProcessResult {
  int exit_code = -1;  // 128 + signal when killed by a signal
  std::string out;
  std::string err;
};

/// Runs argv[0] (PATH lookup) with `input` on stdin and captures both output
/// streams. Throws PipelineError when the executable cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv,
                          std::string_view input = {});

}  // namespace seqstory
