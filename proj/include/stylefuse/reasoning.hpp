#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stylefuse/attributes.hpp"

namespace stylefuse::reasoning {

// Bumped whenever the prompt text changes; part of every cache key through the
// prompt bytes.
inline constexpr std::string_view kPromptVersion = "aesthetic-cot/v1";

struct AttributeThought {
  std::string keyword;
  std::string reason;

  friend bool operator==(const AttributeThought&, const AttributeThought&) = default;
};

struct AestheticProfile {
  // Only complete thoughts (nonempty keyword) are stored.
  std::map<Attribute, AttributeThought> thoughts;

  bool complete(Attribute a) const { return thoughts.contains(a); }
  std::vector<Attribute> incomplete() const;

  friend bool operator==(const AestheticProfile&, const AestheticProfile&) = default;
};

struct ReasoningRecord {
  std::string identification_summary;
  std::string target_description;
  AestheticProfile profile;
  std::string model_id;
  std::string prompt_hash;  // hex SHA-256 of the canonical prompt bytes
  std::string raw_response;
  std::string created_at;   // UTC, ISO 8601
  std::vector<std::string> dropped_keys;  // attribute keys outside the closed set

  friend bool operator==(const ReasoningRecord&, const ReasoningRecord&) = default;
};

nlohmann::json to_json(const ReasoningRecord& record);
ReasoningRecord record_from_json(const nlohmann::json& j);
// UTF-8 text envelope stored in the transcript cache.
std::string serialize_record(const ReasoningRecord& record);
// Throws kFormatError on a malformed envelope.
ReasoningRecord deserialize_record(std::string_view text);

nlohmann::json profile_to_json(const AestheticProfile& profile);

// ---------------------------------------------------------------------------
// Prompt construction

enum class ImageTransport { kInline, kUrl };

struct ImageSource {
  std::filesystem::path file;  // read for inline transport and content digests
  std::string ref;             // catalog-relative reference, used in URL mode
};

struct TaskInput {
  enum class Kind { kFitb, kCir };
  Kind kind = Kind::kCir;
  std::string category;                 // CIR only
  std::vector<ImageSource> candidates;  // FITB only
};

struct PromptOptions {
  bool identify_step = true;
  bool aesthetic_thoughts = true;
  std::size_t max_images = 16;
  ImageTransport transport = ImageTransport::kInline;
  std::string image_base_url;  // URL mode prefix for relative refs
};

struct PromptImage {
  std::string label;
  std::string mime;
  std::string sha256;  // hex digest of the image content (or URL if unreadable)
  std::string url;     // data: URL in inline mode
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<PromptImage> images;

  // Everything that identifies the request apart from the model settings.
  std::string canonical_bytes() const;
  std::string prompt_hash() const;
};

// Throws kEmptyOutfit, kUnreadableImage, kTooManyImages.
PromptBundle build_prompt(std::span<const ImageSource> outfit, const TaskInput& task,
                          const PromptOptions& options = {});

// ---------------------------------------------------------------------------
// Response parsing

// First balanced top-level JSON object inside arbitrary text (code fences,
// surrounding prose). Candidates that are balanced but not valid JSON are
// skipped.
std::optional<nlohmann::json> extract_first_object(std::string_view raw);

// Never throws anything but stylefuse::Error (kNoParsableObject,
// kMissingTargetDescription). model_id, prompt_hash and created_at are left
// for the caller.
ReasoningRecord parse_reasoning(std::string_view raw);

// Text embedded for an attribute thought: "<keyword>: <reason>".
std::string attribute_text(const AttributeThought& thought);

}  // namespace stylefuse::reasoning
