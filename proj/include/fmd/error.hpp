#pragma once

#include <stdexcept>
#include <string>

namespace fmd {

// Error categories double as process exit codes for the CLI.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void config_error(const std::string& msg) {
  throw Error(ErrorKind::config, msg);
}
[[noreturn]] inline void data_error(const std::string& msg) {
  throw Error(ErrorKind::data, msg);
}
[[noreturn]] inline void numeric_error(const std::string& msg) {
  throw Error(ErrorKind::numeric, msg);
}

}  // namespace fmd
