#include "qfs/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace qfs {

void init_logging()
{
    auto logger = spdlog::get("qfs");
    if (!logger) {
        logger = spdlog::stderr_color_mt("qfs");
    }
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("QFS_LOG")) {
        spdlog::set_level(spdlog::level::from_str(env));
    }
}

}  // namespace qfs
