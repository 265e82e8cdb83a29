#pragma once
#include <stdexcept>
#include <string>

namespace gqr {

enum class ErrorCode {
  invalid_argument = 1,
  dimension_mismatch = 2,
  singular = 3,
  numeric = 4,
  io = 5,
  internal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace gqr
