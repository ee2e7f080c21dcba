#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace budgetkv {

// Violated precondition or API misuse.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Iterative routine hit its iteration cap; carries the last estimate.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate_(last_estimate) {}

  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

// Requested deployment does not fit on the device.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace budgetkv
