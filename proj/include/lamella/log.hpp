#pragma once

#include <string>

namespace lamella {

/// Reads LAMELLA_LOG (trace, debug, info, warn, error, off; default warn).
void init_logging();

void log_debug(const std::string& msg);
void log_info(const std::string& msg);
void log_warn(const std::string& msg);

}  // namespace lamella
