#pragma once

#include <stdexcept>
#include <string>

namespace byzgd {

// Invalid arguments are reported with std::invalid_argument throughout.

/// Raised when a loss model lacks an optional capability (e.g. a closed-form
/// population gradient).
class UnsupportedOperation : public std::logic_error {
 public:
  explicit UnsupportedOperation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace byzgd
