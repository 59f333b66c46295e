#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phosc {

enum class ErrorCode {
  kUnknownCharacter,
  kEmptyWord,
  kParseError,
  kMissingCharacter,
  kInvalidSymbol,
  kInfeasibleLabel,
  kTooLarge,
  kShapeMismatch,
  kStateError,
  kTooSmall,
  kSpecMismatch,
  kEmptyDataset,
  kDivergedLoss,
  kZeroVector,
  kEmptyLexicon,
  kDuplicateSignature,
  kEmpty,
  kOutOfRange,
  kEmptyTruth,
  kWordTooLong,
  kInsufficientWords,
  kIoError,
  kMissingPartition,
  kFormatError,
  kConfigError,
  kDuplicateWord,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace phosc
