#include "grab/error.hpp"

namespace grab {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid_input";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kConstraintViolation: return "constraint_violation";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kCapability: return "capability";
    case ErrorCode::kLoad: return "load_error";
    case ErrorCode::kIngest: return "ingest_error";
    case ErrorCode::kFormat: return "format_error";
    case ErrorCode::kBuild: return "build_error";
    case ErrorCode::kProviderUnavailable: return "provider_unavailable";
    case ErrorCode::kProviderBadResponse: return "provider_bad_response";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

}  // namespace grab
