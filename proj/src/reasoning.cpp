#include "stylefuse/reasoning.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "stylefuse/digest.hpp"
#include "stylefuse/error.hpp"

namespace stylefuse::reasoning {
namespace {

using json = nlohmann::json;

constexpr std::string_view kRecordFormat = "stylefuse.reasoning-record/1";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string mime_for(const std::filesystem::path& path) {
  const std::string ext = lowercase(path.extension().string());
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

std::string candidate_label(std::size_t i) {
  std::string label = "Candidate ";
  if (i < 26) {
    label.push_back(static_cast<char>('A' + i));
  } else {
    label += std::to_string(i + 1);
  }
  return label;
}

PromptImage attach(const ImageSource& source, std::string label, const PromptOptions& options) {
  PromptImage image;
  image.label = std::move(label);
  image.mime = mime_for(source.file.empty() ? std::filesystem::path(source.ref) : source.file);
  if (options.transport == ImageTransport::kInline) {
    std::string bytes;
    try {
      bytes = read_file_bytes(source.file);
    } catch (const Error&) {
      throw Error(Errc::kUnreadableImage, "cannot read image " + source.file.string());
    }
    image.sha256 = sha256_hex(bytes);
    image.url = "data:" + image.mime + ";base64," + base64_encode(bytes);
    return image;
  }
  const bool absolute = source.ref.starts_with("http://") || source.ref.starts_with("https://");
  image.url = absolute ? source.ref : options.image_base_url + source.ref;
  std::error_code ec;
  if (!source.file.empty() && std::filesystem::is_regular_file(source.file, ec)) {
    image.sha256 = sha256_hex(read_file_bytes(source.file));
  } else {
    image.sha256 = sha256_hex(image.url);
  }
  return image;
}

constexpr std::string_view kSystemText =
    "You are an expert fashion stylist. You complete partial outfits by reasoning "
    "step by step about how garments work together, and you always answer with a "
    "single JSON object and nothing else.";

void append_steps(std::ostringstream& out, const TaskInput& task, const PromptOptions& options) {
  int step = 1;
  if (options.identify_step) {
    out << "Step " << step++ << " - Identify:\n"
        << "Describe the role of every outfit item (for example top, bottom, outerwear, "
           "footwear, accessory), its visual and semantic features, and how the items "
           "relate to each other";
    if (task.kind == TaskInput::Kind::kFitb) {
      out << " and to each candidate";
    } else {
      out << " and to the missing " << task.category;
    }
    out << ".\n\n";
  }
  if (options.aesthetic_thoughts) {
    out << "Step " << step++ << " - Aesthetic thoughts:\n"
        << "Reason about the completed outfit along each of these six aesthetic attributes: ";
    for (std::size_t i = 0; i < kAllAttributes.size(); ++i) {
      out << (i == 0 ? "" : ", ") << to_string(kAllAttributes[i]);
    }
    out << ". For every attribute give a keyword that briefly describes it and a reason "
           "explaining why it suits the outfit.\n\n";
  }
  out << "Step " << step << " - Target item description:\n";
  if (task.kind == TaskInput::Kind::kFitb) {
    out << "Decide which candidate best completes the outfit and write a detailed visual "
           "description of that item";
  } else {
    out << "Write a detailed visual description of the missing " << task.category
        << " that best completes the outfit";
  }
  if (options.identify_step || options.aesthetic_thoughts) {
    out << ", grounded in the previous steps";
  }
  out << ". Mention category, color, pattern, material, shape and style.\n\n";
}

void append_schema(std::ostringstream& out, const PromptOptions& options) {
  out << "Respond with exactly one JSON object using this schema:\n{\n";
  if (options.identify_step) out << "  \"identification\": \"<result of the identify step>\",\n";
  if (options.aesthetic_thoughts) {
    out << "  \"attributes\": {\n";
    for (std::size_t i = 0; i < kAllAttributes.size(); ++i) {
      out << "    \"" << to_string(kAllAttributes[i])
          << "\": {\"keyword\": \"<keyword>\", \"reason\": \"<reason>\"}"
          << (i + 1 < kAllAttributes.size() ? ",\n" : "\n");
    }
    out << "  },\n";
  }
  out << "  \"target_description\": \"<description of the missing item>\"\n}\n";
}

std::string thought_field(const json& value, const char* field) {
  auto it = value.find(field);
  if (it == value.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

void read_attribute(ReasoningRecord& record, std::string_view key, const json& value) {
  const auto attribute = parse_attribute(lowercase(trim(key)));
  if (!attribute) {
    record.dropped_keys.emplace_back(key);
    return;
  }
  if (!value.is_object() || record.profile.thoughts.contains(*attribute)) return;
  AttributeThought thought{std::string(trim(thought_field(value, "keyword"))),
                           thought_field(value, "reason")};
  if (thought.keyword.empty()) return;
  record.profile.thoughts.emplace(*attribute, std::move(thought));
}

std::string text_of(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return {};
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace

std::vector<Attribute> AestheticProfile::incomplete() const {
  std::vector<Attribute> out;
  for (Attribute a : kAllAttributes) {
    if (!complete(a)) out.push_back(a);
  }
  return out;
}

json profile_to_json(const AestheticProfile& profile) {
  json out = json::object();
  for (const auto& [attribute, thought] : profile.thoughts) {
    out[std::string(to_string(attribute))] = {{"keyword", thought.keyword},
                                              {"reason", thought.reason}};
  }
  return out;
}

json to_json(const ReasoningRecord& record) {
  json incomplete = json::array();
  for (Attribute a : record.profile.incomplete()) incomplete.push_back(to_string(a));
  return json{{"format", kRecordFormat},
              {"identification_summary", record.identification_summary},
              {"target_description", record.target_description},
              {"profile", profile_to_json(record.profile)},
              {"incomplete", std::move(incomplete)},
              {"model_id", record.model_id},
              {"prompt_hash", record.prompt_hash},
              {"raw_response", record.raw_response},
              {"created_at", record.created_at},
              {"dropped_keys", record.dropped_keys}};
}

ReasoningRecord record_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kRecordFormat) {
      throw Error(Errc::kFormatError, "not a reasoning record envelope");
    }
    ReasoningRecord record;
    record.identification_summary = j.at("identification_summary").get<std::string>();
    record.target_description = j.at("target_description").get<std::string>();
    for (const auto& [key, value] : j.at("profile").items()) {
      const auto attribute = parse_attribute(key);
      if (!attribute) throw Error(Errc::kFormatError, "unknown attribute '" + key + "' in record");
      record.profile.thoughts.emplace(
          *attribute, AttributeThought{value.at("keyword").get<std::string>(),
                                       value.at("reason").get<std::string>()});
    }
    record.model_id = j.at("model_id").get<std::string>();
    record.prompt_hash = j.at("prompt_hash").get<std::string>();
    record.raw_response = j.at("raw_response").get<std::string>();
    record.created_at = j.at("created_at").get<std::string>();
    record.dropped_keys = j.value("dropped_keys", std::vector<std::string>{});
    if (trim(record.target_description).empty()) {
      throw Error(Errc::kFormatError, "record has an empty target description");
    }
    return record;
  } catch (const json::exception& e) {
    throw Error(Errc::kFormatError, std::string("malformed reasoning record: ") + e.what());
  }
}

std::string serialize_record(const ReasoningRecord& record) {
  return to_json(record).dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

ReasoningRecord deserialize_record(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kFormatError, "reasoning record is not valid JSON");
  return record_from_json(j);
}

std::string PromptBundle::canonical_bytes() const {
  std::string out;
  out.append(system_text).push_back('\0');
  out.append(user_text).push_back('\0');
  for (const PromptImage& image : images) {
    out.append(image.label).push_back('\0');
    out.append(image.mime).push_back('\0');
    out.append(image.sha256).push_back('\0');
  }
  return out;
}

std::string PromptBundle::prompt_hash() const { return sha256_hex(canonical_bytes()); }

PromptBundle build_prompt(std::span<const ImageSource> outfit, const TaskInput& task,
                          const PromptOptions& options) {
  if (outfit.empty()) throw Error(Errc::kEmptyOutfit, "outfit has no images");
  const std::size_t candidate_count =
      task.kind == TaskInput::Kind::kFitb ? task.candidates.size() : 0;
  if (outfit.size() + candidate_count > options.max_images) {
    throw Error(Errc::kTooManyImages, std::to_string(outfit.size() + candidate_count) +
                                          " images exceed the limit of " +
                                          std::to_string(options.max_images));
  }
  if (task.kind == TaskInput::Kind::kCir && trim(task.category).empty()) {
    throw Error(Errc::kInvalidArgument, "CIR prompt needs a target category");
  }
  if (task.kind == TaskInput::Kind::kFitb && task.candidates.empty()) {
    throw Error(Errc::kInvalidArgument, "FITB prompt needs candidate images");
  }

  PromptBundle bundle;
  bundle.system_text = std::string(kSystemText);
  for (std::size_t i = 0; i < outfit.size(); ++i) {
    bundle.images.push_back(attach(outfit[i], "Outfit item " + std::to_string(i + 1), options));
  }
  for (std::size_t i = 0; i < candidate_count; ++i) {
    bundle.images.push_back(attach(task.candidates[i], candidate_label(i), options));
  }

  std::ostringstream out;
  out << "Prompt version: " << kPromptVersion << "\n\n";
  out << "The attached images labeled Outfit item 1 to Outfit item " << outfit.size()
      << " form a partial outfit.";
  if (task.kind == TaskInput::Kind::kFitb) {
    out << " The images labeled " << candidate_label(0) << " to "
        << candidate_label(candidate_count - 1)
        << " are candidate items; exactly one of them completes the outfit.\n\n";
  } else {
    out << " The missing item belongs to the category \"" << task.category << "\".\n\n";
  }
  out << "Work through the following steps.\n\n";
  append_steps(out, task, options);
  append_schema(out, options);
  bundle.user_text = std::move(out).str();
  return bundle;
}

std::optional<json> extract_first_object(std::string_view raw) {
  std::size_t start = raw.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < raw.size(); ++i) {
      const char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          end = i;
          break;
        }
      }
    }
    if (end != std::string_view::npos) {
      json parsed = json::parse(raw.substr(start, end - start + 1), nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    start = raw.find('{', start + 1);
  }
  return std::nullopt;
}

namespace {

ReasoningRecord parse_reasoning_unchecked(std::string_view raw) {
  if (trim(raw).empty()) throw Error(Errc::kNoParsableObject, "empty response");
  const std::optional<json> object = extract_first_object(raw);
  if (!object) throw Error(Errc::kNoParsableObject, "no JSON object found in response");

  ReasoningRecord record;
  record.raw_response = std::string(raw);
  if (auto it = object->find("target_description"); it != object->end() && it->is_string()) {
    record.target_description = std::string(trim(it->get<std::string>()));
  }
  if (record.target_description.empty()) {
    throw Error(Errc::kMissingTargetDescription, "response lacks target_description");
  }
  if (auto it = object->find("identification"); it != object->end()) {
    record.identification_summary = text_of(*it);
  }
  if (auto it = object->find("attributes"); it != object->end()) {
    if (it->is_object()) {
      for (const auto& [key, value] : it->items()) read_attribute(record, key, value);
    } else if (it->is_array()) {
      for (const json& entry : *it) {
        if (!entry.is_object()) continue;
        const std::string name =
            entry.contains("attribute") ? thought_field(entry, "attribute") : thought_field(entry, "name");
        read_attribute(record, name, entry);
      }
    }
  }
  return record;
}

}  // namespace

ReasoningRecord parse_reasoning(std::string_view raw) {
  try {
    return parse_reasoning_unchecked(raw);
  } catch (const json::exception& e) {
    throw Error(Errc::kNoParsableObject, std::string("malformed response object: ") + e.what());
  }
}

std::string attribute_text(const AttributeThought& thought) {
  if (trim(thought.reason).empty()) return thought.keyword;
  return thought.keyword + ": " + thought.reason;
}

}  // namespace stylefuse::reasoning
