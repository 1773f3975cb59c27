#include "stylefuse/error.hpp"

namespace stylefuse {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kNonFinite: return "NonFinite";
    case Errc::kZeroVector: return "ZeroVector";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptyOutfit: return "EmptyOutfit";
    case Errc::kEmptyAttributes: return "EmptyAttributes";
    case Errc::kEmptyCandidates: return "EmptyCandidates";
    case Errc::kUnreadableImage: return "UnreadableImage";
    case Errc::kTooManyImages: return "TooManyImages";
    case Errc::kEndpointUnavailable: return "EndpointUnavailable";
    case Errc::kTimeout: return "Timeout";
    case Errc::kAuthFailure: return "AuthFailure";
    case Errc::kRateLimited: return "RateLimited";
    case Errc::kBadResponse: return "BadResponse";
    case Errc::kNoParsableObject: return "NoParsableObject";
    case Errc::kMissingTargetDescription: return "MissingTargetDescription";
    case Errc::kCacheMissInReplayMode: return "CacheMissInReplayMode";
    case Errc::kIoError: return "IoError";
    case Errc::kFormatError: return "FormatError";
    case Errc::kSchemaError: return "SchemaError";
    case Errc::kMissingEmbedding: return "MissingEmbedding";
    case Errc::kDuplicateItemId: return "DuplicateItemId";
    case Errc::kUnknownCategory: return "UnknownCategory";
    case Errc::kEmptyCategory: return "EmptyCategory";
    case Errc::kUnknownItem: return "UnknownItem";
    case Errc::kEmptyCatalog: return "EmptyCatalog";
    case Errc::kTooFewCandidates: return "TooFewCandidates";
    case Errc::kMissingVoteShares: return "MissingVoteShares";
    case Errc::kMissingAttributeTag: return "MissingAttributeTag";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kEmbedderUnavailable: return "EmbedderUnavailable";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace stylefuse
