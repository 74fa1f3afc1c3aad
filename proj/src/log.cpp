#include "lamella/log.hpp"

#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace lamella {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> log;
  std::call_once(once, [] {
    log = spdlog::stderr_color_mt("lamella");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("LAMELLA_LOG")) level = spdlog::level::from_str(env);
    log->set_level(level);
  });
  return log;
}

}  // namespace

void init_logging() { logger(); }
void log_debug(const std::string& msg) { logger()->debug(msg); }
void log_info(const std::string& msg) { logger()->info(msg); }
void log_warn(const std::string& msg) { logger()->warn(msg); }

}  // namespace lamella
