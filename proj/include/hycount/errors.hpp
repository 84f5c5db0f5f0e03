#pragma once

#include <stdexcept>
#include <string>

namespace hycount {

// Each category maps onto one CLI exit code (see tools/hycount.cpp).
enum class ErrorKind {
  invalid_argument,
  parse,
  replay_miss,
  dimension_mismatch,
  backend,
  io,
  infeasible_spec,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::replay_miss: return "replay miss";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::backend: return "backend error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::infeasible_spec: return "infeasible spec";
  }
  return "error";
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hycount
