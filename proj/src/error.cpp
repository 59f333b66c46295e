#include "phosc/error.hpp"

namespace phosc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownCharacter: return "UnknownCharacter";
    case ErrorCode::kEmptyWord: return "EmptyWord";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingCharacter: return "MissingCharacter";
    case ErrorCode::kInvalidSymbol: return "InvalidSymbol";
    case ErrorCode::kInfeasibleLabel: return "InfeasibleLabel";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kStateError: return "StateError";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kEmptyLexicon: return "EmptyLexicon";
    case ErrorCode::kDuplicateSignature: return "DuplicateSignature";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kEmptyTruth: return "EmptyTruth";
    case ErrorCode::kWordTooLong: return "WordTooLong";
    case ErrorCode::kInsufficientWords: return "InsufficientWords";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMissingPartition: return "MissingPartition";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kDuplicateWord: return "DuplicateWord";
  }
  return "Unknown";
}

}  // namespace phosc
