#pragma once

#include <stdexcept>

namespace fedgat {

// Raised for invalid experiment configuration (bad fields, impossible
// combinations). Maps to exit code 2 at the CLI boundary.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised for unreadable or malformed dataset inputs. Maps to exit code 3.
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedgat
