#pragma once

#include "sheetagent/workbook.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace sheetagent::convert {

/// Hard limits from the image tool contract; anything wider or taller is refused.
inline constexpr std::uint32_t kMaxImageWidth = 8192;
inline constexpr std::uint32_t kMaxImageHeight = 16384;

struct RenderOptions
{
    std::uint32_t cell_width_px = 96;
    std::uint32_t cell_height_px = 24;
    bool show_gridlines = true;
    bool show_headers_ruler = true; // A/B/C across the top, 1/2/3 down the left
};

/// PNG-encoded RGBA8 raster.
struct RenderedImage
{
    std::uint32_t width_px = 0;
    std::uint32_t height_px = 0;
    std::string png;
};

/// Width of the left ruler when rulers are on. The top ruler is one cell tall.
inline constexpr std::uint32_t kRulerWidth = 48;

/// Text shown for a cell in either rendering. Numbers follow the cell's
/// number format when it is a plain decimal pattern ("0.00", "#,##0").
std::string cell_text(const CellView& cell);

/// Escapes the ten LaTeX specials; newlines become spaces.
std::string latex_escape(std::string_view text);

/// `tabular` rendering of a range. Throws RangeOutOfBounds.
std::string range_to_latex(const Sheet& sheet, const RangeRef& range);

/// Image dimensions for a range, without rendering.
std::pair<std::uint64_t, std::uint64_t> image_size(const RangeRef& range, const RenderOptions& opts);

/// Throws RangeTooLarge, RangeOutOfBounds, std::invalid_argument on bad options.
RenderedImage range_to_image(const Sheet& sheet, const RangeRef& range, const RenderOptions& opts = {});

} // namespace sheetagent::convert
