#pragma once

#include <spdlog/spdlog.h>

namespace qfs {

/// Configure the default logger from the QFS_LOG environment variable
/// (trace, debug, info, warn, error, off). Defaults to warn.
void init_logging();

}  // namespace qfs
