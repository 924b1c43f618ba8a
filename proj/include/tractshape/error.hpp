#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tractshape {

enum class ErrorCode {
  // geometry / validation
  InvalidGeometry,
  InvalidSpec,
  InvalidArgument,
  DegenerateInput,
  // I/O and file formats
  IoFailure,
  MissingMagic,
  UnsupportedDatatype,
  MalformedHeader,
  TruncatedPayload,
  EmptyFile,
  SchemaError,
  CheckpointMismatch,
  // numerics
  GridTooLarge,
  ShapeMismatch,
  NonFiniteValue,
  NonFiniteLoss,
  ZeroVariance,
  TooFewSubjects,
  TooFewRows,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Broad category used by the CLI to pick an exit code.
enum class ErrorCategory { Usage, Data, Numeric };

ErrorCategory error_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tractshape
