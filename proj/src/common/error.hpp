#pragma once

#include <stdexcept>
#include <string>

namespace cunet {

// Machine-parseable error categories. The CLI maps these to exit codes and
// the C API maps them to status values, so every throw site picks one.
enum class ErrorCategory {
  Argument,
  Config,
  Io,
  Data,
  Internal,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Argument: return "argument";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_argument(const std::string& msg) { throw Error(ErrorCategory::Argument, msg); }
[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorCategory::Config, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorCategory::Io, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorCategory::Data, msg); }
[[noreturn]] inline void throw_internal(const std::string& msg) { throw Error(ErrorCategory::Internal, msg); }

}  // namespace cunet
