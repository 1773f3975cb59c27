#include "stylefuse/attributes.hpp"

namespace stylefuse {

std::string_view to_string(Attribute a) noexcept {
  switch (a) {
    case Attribute::kColor: return "color";
    case Attribute::kStyle: return "style";
    case Attribute::kOccasion: return "occasion";
    case Attribute::kSeason: return "season";
    case Attribute::kMaterial: return "material";
    case Attribute::kBalance: return "balance";
  }
  return "";
}

std::optional<Attribute> parse_attribute(std::string_view name) noexcept {
  for (Attribute a : kAllAttributes) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

}  // namespace stylefuse
