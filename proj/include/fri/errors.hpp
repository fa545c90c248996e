#pragma once

#include <stdexcept>

namespace fri {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A step or sample budget ran out before the computation finished.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoBracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fri
