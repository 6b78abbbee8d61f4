#pragma once

#include <stdexcept>
#include <string>

namespace liftkit {

// Categories line up with the CLI exit codes and the C API status values.
enum class ErrorKind {
  config = 1,
  data = 2,
  numeric = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& what) { throw Error(ErrorKind::config, what); }
[[noreturn]] inline void fail_data(const std::string& what) { throw Error(ErrorKind::data, what); }
[[noreturn]] inline void fail_numeric(const std::string& what) { throw Error(ErrorKind::numeric, what); }

}  // namespace liftkit
