#pragma once

#include <stdexcept>
#include <string>

namespace fedpop {

// Numerical failure (Cholesky breakdown, non-finite values, divergence).
// Distinct from std::invalid_argument so the CLI can map it to its own
// exit code.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O and parse failures; carries a line number when one is known.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg, long line = -1)
      : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")"
                                     : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_ = -1;
};

}  // namespace fedpop
