#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qfs::cli {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitDataError = 2;
constexpr int kExitUsage = 64;

/// Run one command line (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace qfs::cli
