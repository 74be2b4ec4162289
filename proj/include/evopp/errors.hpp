#pragma once

#include <stdexcept>

namespace evopp {

// Error categories map 1:1 onto CLI exit codes and C API status values:
// config errors 2, data errors 3, numerical/instability errors 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evopp
