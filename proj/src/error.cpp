#include "minescape/error.hpp"

namespace minescape {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingBand: return "MissingBand";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::GeoreferenceMissing: return "GeoreferenceMissing";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::NoViableScene: return "NoViableScene";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::OutOfExtent: return "OutOfExtent";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::ModelMismatch: return "ModelMismatch";
    case ErrorCode::UnsupportedLatitude: return "UnsupportedLatitude";
    case ErrorCode::CatalogUnavailable: return "CatalogUnavailable";
    case ErrorCode::EmptyDossier: return "EmptyDossier";
    case ErrorCode::SegmentTooLong: return "SegmentTooLong";
    case ErrorCode::TemplateError: return "TemplateError";
    case ErrorCode::PayloadInvalid: return "PayloadInvalid";
    case ErrorCode::ProviderRejected: return "ProviderRejected";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::CaptionTooLong: return "CaptionTooLong";
    case ErrorCode::JudgeFormatError: return "JudgeFormatError";
    case ErrorCode::JudgeRangeError: return "JudgeRangeError";
    case ErrorCode::NoObjectFound: return "NoObjectFound";
    case ErrorCode::ParseFailed: return "ParseFailed";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MetadataMissing: return "MetadataMissing";
    case ErrorCode::EmbedderMismatch: return "EmbedderMismatch";
    case ErrorCode::InsufficientEvidence: return "InsufficientEvidence";
    case ErrorCode::UngroundedCitation: return "UngroundedCitation";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::SyncFailed: return "SyncFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::string subject,
             std::optional<std::int64_t> count, bool retryable)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)),
      count_(count),
      retryable_(retryable) {}

}  // namespace minescape
