#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace stylefuse {

// The closed set of aesthetic reasoning dimensions. Declaration order is the
// canonical iteration order everywhere (prompt text, sums, serialization).
enum class Attribute { kColor, kStyle, kOccasion, kSeason, kMaterial, kBalance };

inline constexpr std::array<Attribute, 6> kAllAttributes = {
    Attribute::kColor,  Attribute::kStyle,    Attribute::kOccasion,
    Attribute::kSeason, Attribute::kMaterial, Attribute::kBalance};

std::string_view to_string(Attribute a) noexcept;

// Case-sensitive match on the lowercase names.
std::optional<Attribute> parse_attribute(std::string_view name) noexcept;

}  // namespace stylefuse
