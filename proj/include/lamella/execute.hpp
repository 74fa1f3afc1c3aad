#pragma once

#include "lamella/config.hpp"

namespace lamella {

/// Exit statuses shared by execute() and the command-line tool.
enum ExitStatus : int { exit_ok = 0, exit_error = 1, exit_check_failed = 2 };

/// Runs the scenario and writes its outputs into config.output_dir: a temporary
/// sibling directory is filled first and renamed into place at the end.
/// Returns exit_ok, or exit_check_failed when an enabled check fails or a sweep
/// comes back partial. Errors propagate as exceptions (nothing is left behind).
int execute(const ExperimentConfig& config);

}  // namespace lamella
