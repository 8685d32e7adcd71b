#pragma once

#include <stdexcept>
#include <string>

namespace vard {

enum class ErrorCode {
  kInvalidArgument,
  kDegenerateFeature,
  kIllConditionedPenalty,
  kEmptyBlock,
  kEmptyModel,
  kInconsistentState,
  kDimensionMismatch,
  kNonFinite,
  kDegenerateFold,
  kParse,
  kMissingColumn,
  kUnknownCase,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vard
