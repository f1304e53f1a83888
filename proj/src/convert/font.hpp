#pragma once

#include <array>
#include <cstdint>

namespace sheetagent::convert::detail {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = 6;

/// Five column bytes, bit 0 at the top. Code points outside printable
/// ASCII get a hollow box.
const std::array<std::uint8_t, 5>& glyph(char32_t cp);

} // namespace sheetagent::convert::detail
