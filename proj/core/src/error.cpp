#include "affect/error.hpp"

namespace affect {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DistributionNegative: return "DistributionNegative";
    case ErrorKind::DistributionSumOutOfRange: return "DistributionSumOutOfRange";
    case ErrorKind::EmptyDatabase: return "EmptyDatabase";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::SignatureMismatch: return "SignatureMismatch";
    case ErrorKind::BinningMismatch: return "BinningMismatch";
    case ErrorKind::AllZeroWeights: return "AllZeroWeights";
    case ErrorKind::UnknownBackend: return "UnknownBackend";
    case ErrorKind::BackendFailure: return "BackendFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ManifestParseError: return "ManifestParseError";
    case ErrorKind::MissingSidecar: return "MissingSidecar";
    case ErrorKind::ImageDecodeError: return "ImageDecodeError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, std::string message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      detail_(std::move(message)) {}

Error Error::with_stage(std::string stage) const {
  Error tagged(kind_, "[" + stage + "] " + detail_);
  tagged.detail_ = detail_;
  tagged.stage_ = std::move(stage);
  return tagged;
}

}  // namespace affect
