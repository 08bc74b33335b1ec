#pragma once

#include <stdexcept>
#include <string>

namespace grab {

enum class ErrorCode {
  kInvalidInput,
  kDimensionMismatch,
  kConstraintViolation,
  kNotFound,
  kCapability,
  kLoad,
  kIngest,
  kFormat,
  kBuild,
  kProviderUnavailable,
  kProviderBadResponse,
  kIo,
};

const char* ErrorCodeName(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace grab
