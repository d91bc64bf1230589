#pragma once

#include <stdexcept>
#include <string>

namespace gwkit {

enum class ErrorKind {
  kInput,      // malformed or inconsistent input
  kNumerical,  // solver could not produce a usable result
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::kNumerical, what) {}
};

// Raised by the standard-domain Sinkhorn when exp(-C/eps) underflows so that
// a scaling denominator becomes zero. Retry with SolverConfig::logDomain.
class KernelUnderflowError : public NumericalError {
 public:
  explicit KernelUnderflowError(const std::string& what) : NumericalError(what) {}
};

}  // namespace gwkit
