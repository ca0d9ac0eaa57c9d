#pragma once

#include <stdexcept>
#include <string>

namespace prmgui {

// Input failed a documented precondition (bad task params, bad sizes, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An action did not satisfy the argument rules for its kind.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Session lifecycle misuse, e.g. stepping a finished world.
class SessionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class VersionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace prmgui
