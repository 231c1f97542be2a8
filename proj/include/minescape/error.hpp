#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace minescape {

enum class ErrorCode {
  // raster / indices
  MissingBand,
  DecodeError,
  GeoreferenceMissing,
  EmptyScene,
  NoViableScene,
  ShapeError,
  // udm
  OutOfExtent,
  InsufficientSamples,
  ModelMismatch,
  // sites
  UnsupportedLatitude,
  CatalogUnavailable,
  EmptyDossier,
  SegmentTooLong,
  // caption / providers
  TemplateError,
  PayloadInvalid,
  ProviderRejected,
  ProviderUnavailable,
  EmptyGeneration,
  CaptionTooLong,
  // judge
  JudgeFormatError,
  JudgeRangeError,
  NoObjectFound,
  ParseFailed,
  // rag
  ConfigError,
  MetadataMissing,
  EmbedderMismatch,
  InsufficientEvidence,
  UngroundedCitation,
  // pipeline / service
  NotFound,
  IllegalTransition,
  BadRequest,
  SyncFailed,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. `code()` is the machine-readable
/// identifier the service and CLI report; `subject()` names the offending
/// band, class, segment or id when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {},
        std::optional<std::int64_t> count = std::nullopt, bool retryable = false);

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  std::optional<std::int64_t> count() const noexcept { return count_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::optional<std::int64_t> count_;
  bool retryable_;
};

}  // namespace minescape
