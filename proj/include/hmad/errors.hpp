#pragma once

#include <stdexcept>

namespace hmad {

// Malformed or unreadable file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hmad
