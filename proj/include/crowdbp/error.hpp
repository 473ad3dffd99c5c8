#pragma once

#include <stdexcept>
#include <string>

namespace crowdbp {

enum class ErrorKind {
  parameter,           // invalid argument or configuration
  generation,          // random graph generation exhausted its budget
  size,                // exact enumeration guard exceeded
  data_format,         // malformed dataset or config file
  numeric_degeneracy,  // all-zero message or belief
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Process exit code for an error kind: 2 parameter/validation, 3 data format, 4 numeric.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace crowdbp
