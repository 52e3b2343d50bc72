#pragma once

// Command-line front end: ask, bench, judge, replay.
//
// Exit codes: 0 ok, 1 other error, 2 usage or configuration, 3 planning
// failure, 4 network retries exhausted, 5 answer format, 6 malformed trace.

#include <ostream>
#include <string>
#include <vector>

#include "pmr/config.hpp"

namespace pmr::cli {

enum ExitCode : int {
    kOk = 0,
    kOther = 1,
    kUsage = 2,
    kPlanning = 3,
    kNetwork = 4,
    kAnswerFormat = 5,
    kTraceFormat = 6,
};

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const config::EnvLookup& env = config::process_env());

/// Exit code for a session failure kind recorded in a trace.
int exit_code_for_failure(const std::string& kind);

}  // namespace pmr::cli
