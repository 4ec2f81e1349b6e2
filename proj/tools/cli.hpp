#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace abe_cities::cli {

enum ExitCode : int { kOk = 0, kInvariantViolation = 1, kConfigError = 2 };

struct CliOptions {
  std::string command;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> rep;
  std::optional<std::uint32_t> epsilon;
  std::optional<double> route_length;
  std::optional<std::uint32_t> users;
  std::optional<std::uint32_t> devices;
  std::optional<std::string> fail_inject;
  int verbosity = 0;
};

int cmd_demo(const CliOptions& opts);
int cmd_experiment(const CliOptions& opts);
int cmd_bench(const CliOptions& opts);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace abe_cities::cli
