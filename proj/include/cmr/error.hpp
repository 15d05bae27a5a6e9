#pragma once

#include <stdexcept>
#include <string>

namespace cmr {

// Numeric values are part of the C ABI (see cmr.h); do not renumber.
enum class ErrorCode : int {
  kFormat = 1,
  kSize = 2,
  kArgument = 3,
  kLocate = 4,
  kUndefinedDistance = 5,
  kTraining = 6,
  kSelection = 7,
  kStratification = 8,
  kBuild = 9,
  kTrace = 10,
  kIo = 11,
  kModel = 12,
  kConfig = 13,
  kPipeline = 14,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace cmr
