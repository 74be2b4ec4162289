#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace evopp {

// Command-line overrides layered on top of the configuration file. The seed
// replaces each command's primary stochastic seed (simulate: the top-level
// seed; fit/compare: the sampler seed; study: the study seed); threads
// applies to study only.
struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Runs one command (simulate | fit | compare | study) against a JSON
// configuration text, writing its outputs under out_dir, which is created if
// missing. Every emitted JSON report embeds the resolved configuration and
// seeds. Throws ConfigError, DataError, or NumericError.
void run_command(const std::string& command, const std::string& config_text,
                 const std::string& out_dir, const CommandOverrides& overrides = {});

}  // namespace evopp
