#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "hmad/tracker.hpp"

namespace hmad {

// Bad flags, flag values or config entries; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

// Applies "key=value" lines (blank lines and '#' comments ignored) on top of
// `config`. Keys: mode, seed, initial_samples, add_threshold,
// memory_capacity, update_period, init_iterations, update_iterations, lambda,
// label_sigma, normalize_branches. Throws UsageError on unknown keys or bad
// values.
void apply_config_text(TrackerConfig& config, const std::string& text,
                       const std::string& origin = "config");
void apply_config_file(TrackerConfig& config, const std::filesystem::path& path);

// Entry point behind the hmad executable. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmad
