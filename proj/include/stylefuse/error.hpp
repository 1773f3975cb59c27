#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stylefuse {

// Every failure the engine surfaces carries one of these codes. Callers
// branch on the code, never on the message text.
enum class Errc {
  kInvalidArgument,
  kNonFinite,
  kZeroVector,
  kDimensionMismatch,
  kEmptyOutfit,
  kEmptyAttributes,
  kEmptyCandidates,
  // reasoning
  kUnreadableImage,
  kTooManyImages,
  kEndpointUnavailable,
  kTimeout,
  kAuthFailure,
  kRateLimited,
  kBadResponse,
  kNoParsableObject,
  kMissingTargetDescription,
  kCacheMissInReplayMode,
  // datastore
  kIoError,
  kFormatError,
  kSchemaError,
  kMissingEmbedding,
  kDuplicateItemId,
  kUnknownCategory,
  kEmptyCategory,
  kUnknownItem,
  // retrieval
  kEmptyCatalog,
  kTooFewCandidates,
  // evaluation
  kMissingVoteShares,
  kMissingAttributeTag,
  // configuration / embedder
  kConfigError,
  kEmbedderUnavailable,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace stylefuse
