#pragma once

#include <stdexcept>
#include <string>

namespace posegrid {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kMissingFile = 3,
  kMalformedFile = 4,
  kDimensionMismatch = 5,
  kOutOfImage = 6,
  kOutOfFrustum = 7,
  kBehindCamera = 8,
  kSceneMismatch = 9,
  kIo = 10,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kMalformedFile: return "malformed file";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kOutOfImage: return "out of image";
    case ErrorCode::kOutOfFrustum: return "out of frustum";
    case ErrorCode::kBehindCamera: return "behind camera";
    case ErrorCode::kSceneMismatch: return "scene mismatch";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace posegrid
