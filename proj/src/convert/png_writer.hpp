#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sheetagent::convert::detail {

/// Non-interlaced RGBA8 PNG at a fixed compression level, so equal pixels
/// always give equal bytes.
std::string encode_png(const std::vector<std::uint8_t>& rgba, std::uint32_t width, std::uint32_t height);

} // namespace sheetagent::convert::detail
