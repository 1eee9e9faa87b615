#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hrtfeval {

enum class ErrorCode {
  // input / configuration
  InvalidDirection,
  InvalidSet,
  InvalidConfig,
  UnmatchedDirection,
  MalformedHeader,
  PayloadSizeMismatch,
  UnsupportedVersion,
  UnsupportedConvention,
  MissingVariable,
  IoFailure,
  ParseError,
  DuplicateTrial,
  LengthTooShort,
  LengthMismatch,
  SampleRateMismatch,
  FrontalDirectionMissing,
  ZeroFrontalEnergy,
  SilentImpulse,
  HeterogeneousGrids,
  EmptyBand,
  DelayExceedsLength,
  SpecOutOfRange,
  NoTrials,
  // statistics
  EmptyInput,
  OutOfRangeN,
  ZeroVariance,
  AllZeroDifferences,
  DegenerateShape,
  ConstantInput,
  ShapeMismatch,
  InsufficientSubjects,
  // anything that should never happen on valid input
  Internal,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDirection: return "InvalidDirection";
    case ErrorCode::InvalidSet: return "InvalidSet";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnmatchedDirection: return "UnmatchedDirection";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedConvention: return "UnsupportedConvention";
    case ErrorCode::MissingVariable: return "MissingVariable";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateTrial: return "DuplicateTrial";
    case ErrorCode::LengthTooShort: return "LengthTooShort";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SampleRateMismatch: return "SampleRateMismatch";
    case ErrorCode::FrontalDirectionMissing: return "FrontalDirectionMissing";
    case ErrorCode::ZeroFrontalEnergy: return "ZeroFrontalEnergy";
    case ErrorCode::SilentImpulse: return "SilentImpulse";
    case ErrorCode::HeterogeneousGrids: return "HeterogeneousGrids";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::DelayExceedsLength: return "DelayExceedsLength";
    case ErrorCode::SpecOutOfRange: return "SpecOutOfRange";
    case ErrorCode::NoTrials: return "NoTrials";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::OutOfRangeN: return "OutOfRangeN";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::DegenerateShape: return "DegenerateShape";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message names the offending field, path, line or byte offset.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Internal invariant violations map to a different CLI exit code than
  /// input problems.
  bool is_internal() const noexcept { return code_ == ErrorCode::Internal; }

 private:
  ErrorCode code_;
};

}  // namespace hrtfeval
