#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affect {

/// Failure classes surfaced by the library. Names are stable and appear in
/// CLI messages and service error bodies.
enum class ErrorKind {
  InvalidArgument,
  DistributionNegative,
  DistributionSumOutOfRange,
  EmptyDatabase,
  EmptyCandidates,
  SignatureMismatch,
  BinningMismatch,
  AllZeroWeights,
  UnknownBackend,
  BackendFailure,
  ParseError,
  ManifestParseError,
  MissingSidecar,
  ImageDecodeError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message);

  ErrorKind kind() const noexcept { return kind_; }
  // Empty unless the error crossed a pipeline stage boundary.
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  // Copy of this error tagged with the pipeline stage it escaped from.
  Error with_stage(std::string stage) const;

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

}  // namespace affect
