#pragma once

#include <stdexcept>
#include <string>

namespace lst {

// Malformed on-disk content (bad sizes, unparsable fields, non-rigid poses).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that are well-formed but inconsistent or missing.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// External detector command exited nonzero or produced no output.
class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lst
