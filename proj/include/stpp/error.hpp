#pragma once

#include <stdexcept>
#include <string>

namespace stpp {

// Error categories map one-to-one onto CLI exit codes (see tools/stpp_main.cpp).
enum class ErrorKind {
  kDimension,
  kLabel,
  kConfig,
  kRange,
  kNumeric,
  kLookup,
  kIo,
  kFormat,
  kStage,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace stpp
