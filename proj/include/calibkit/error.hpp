#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace calibkit {

enum class ErrorCode {
  EmptyInput,
  TooManyBins,
  InvalidQ,
  InvalidArgument,
  OutOfRange,
  EmptyDims,
  EmptyEnsemble,
  MissingTimestep,
  NotEnoughVariants,
  KTooLarge,
  MixedDimensions,
  Degenerate,
  NonFinite,
  KindMismatch,
  DimensionMismatch,
  ShapeMismatch,
  MissingLogits,
  EmptyEpisode,
  TooFewEpisodes,
  BadQuantile,
  MissingProfileLevels,
  BadConfig,
  UnknownPreset,
  EmptyGroup,
  ParseError,
  SchemaVersionUnsupported,
  Io,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by bad input (CLI exit code 2); false for runtime
/// failures such as non-convergence or I/O (exit code 1).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure with the 1-based line number and a JSON-pointer-like field path.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string path, const std::string& cause);

  std::size_t line() const noexcept { return line_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::size_t line_;
  std::string path_;
  std::string cause_;
};

}  // namespace calibkit
