#include "font.hpp"
#include "layout.hpp"
#include "png_writer.hpp"
#include "sheetagent/convert.hpp"
#include "sheetagent/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace sheetagent::convert {
namespace {

struct Rgb
{
    std::uint8_t r, g, b;
};

constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{0xD0, 0xD0, 0xD0};
constexpr Rgb kRulerFill{0xEE, 0xEE, 0xEE};
constexpr Rgb kRulerLine{0xA0, 0xA0, 0xA0};
constexpr Rgb kRulerText{0x40, 0x40, 0x40};

Rgb parse_hex(const std::optional<std::string>& hex, Rgb fallback)
{
    if (!hex || hex->size() != 6)
        return fallback;
    try {
        auto v = std::stoul(*hex, nullptr, 16);
        return {std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
    } catch (const std::exception&) {
        return fallback;
    }
}

std::u32string decode_utf8(std::string_view s)
{
    std::u32string out;
    for (std::size_t i = 0; i < s.size();) {
        auto c = static_cast<unsigned char>(s[i]);
        int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
        char32_t cp = len == 1 ? c : c & (0xFF >> (len + 1));
        for (int k = 1; k < len && i + k < s.size(); ++k)
            cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.push_back(len == 1 && c >= 0x80 ? 0xFFFD : cp);
        i += len;
    }
    return out;
}

class Canvas
{
public:
    Canvas(std::uint32_t w, std::uint32_t h) : w_(w), h_(h), px_(std::size_t(w) * h * 4, 255) {}

    void fill(int x0, int y0, int x1, int y1, Rgb c)
    {
        clamp(x0, y0, x1, y1);
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
                put(x, y, c);
    }

    void hline(int x0, int x1, int y, Rgb c) { fill(x0, y, x1, y + 1, c); }
    void vline(int x, int y0, int y1, Rgb c) { fill(x, y0, x + 1, y1, c); }

    /// Draws text clipped to [cx0,cx1)x[cy0,cy1).
    void text(int x, int y, const std::u32string& s, Rgb c, bool bold, int cx0, int cy0, int cx1, int cy1)
    {
        for (char32_t cp : s) {
            const auto& g = detail::glyph(cp);
            for (int col = 0; col < detail::kGlyphWidth; ++col)
                for (int row = 0; row < detail::kGlyphHeight; ++row) {
                    if (!(g[col] >> row & 1))
                        continue;
                    for (int dx = 0; dx <= (bold ? 1 : 0); ++dx) {
                        int px = x + col + dx, py = y + row;
                        if (px >= cx0 && px < cx1 && py >= cy0 && py < cy1)
                            put(px, py, c);
                    }
                }
            x += detail::kGlyphAdvance;
            if (x >= cx1)
                break;
        }
    }

    const std::vector<std::uint8_t>& pixels() const { return px_; }

private:
    void clamp(int& x0, int& y0, int& x1, int& y1) const
    {
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, int(w_));
        y1 = std::min(y1, int(h_));
    }

    void put(int x, int y, Rgb c)
    {
        auto* p = &px_[(std::size_t(y) * w_ + x) * 4];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
        p[3] = 255;
    }

    std::uint32_t w_, h_;
    std::vector<std::uint8_t> px_;
};

int text_width(const std::u32string& s, bool bold)
{
    return s.empty() ? 0 : int(s.size()) * detail::kGlyphAdvance - 1 + (bold ? 1 : 0);
}

} // namespace

std::pair<std::uint64_t, std::uint64_t> image_size(const RangeRef& range, const RenderOptions& opts)
{
    std::uint64_t left = opts.show_headers_ruler ? kRulerWidth : 0;
    std::uint64_t top = opts.show_headers_ruler ? opts.cell_height_px : 0;
    return {left + std::uint64_t(range.columns()) * opts.cell_width_px,
            top + std::uint64_t(range.rows()) * opts.cell_height_px};
}

RenderedImage range_to_image(const Sheet& sheet, const RangeRef& range, const RenderOptions& opts)
{
    if (opts.cell_width_px < 4 || opts.cell_height_px < 4)
        throw std::invalid_argument("cell dimensions must be at least 4 px");
    detail::check_bounds(range);
    auto [w64, h64] = image_size(range, opts);
    if (w64 > kMaxImageWidth || h64 > kMaxImageHeight)
        throw RangeTooLarge("range " + format_range(range) + " renders to " + std::to_string(w64) + "x" +
                            std::to_string(h64) + " px; images must be within 8192x16384 pixels");

    const auto width = static_cast<std::uint32_t>(w64);
    const auto height = static_cast<std::uint32_t>(h64);
    const int cw = int(opts.cell_width_px), ch = int(opts.cell_height_px);
    const int left = opts.show_headers_ruler ? int(kRulerWidth) : 0;
    const int top = opts.show_headers_ruler ? ch : 0;
    const int text_dy = (ch - detail::kGlyphHeight) / 2;

    Canvas canvas(width, height);
    auto layout = detail::make_layout(sheet, range);

    for (const auto& box : layout.boxes) {
        const int x0 = left + int(box.area.start.col - range.start.col) * cw;
        const int y0 = top + int(box.area.start.row - range.start.row) * ch;
        const int x1 = x0 + int(box.area.columns()) * cw;
        const int y1 = y0 + int(box.area.rows()) * ch;
        auto cell = get_cell(sheet, box.anchor);

        canvas.fill(x0, y0, x1, y1, parse_hex(cell.style.fill_color, kWhite));
        if (opts.show_gridlines) {
            canvas.hline(x0, x1, y0, kGrid);
            canvas.vline(x0, y0, y1, kGrid);
        }
        if (cell.style.borders & kBorderTop)
            canvas.hline(x0, x1, y0, kBlack);
        if (cell.style.borders & kBorderBottom)
            canvas.hline(x0, x1, y1 - 1, kBlack);
        if (cell.style.borders & kBorderLeft)
            canvas.vline(x0, y0, y1, kBlack);
        if (cell.style.borders & kBorderRight)
            canvas.vline(x1 - 1, y0, y1, kBlack);

        auto text = decode_utf8(cell_text(cell));
        if (text.empty())
            continue;
        const bool numeric = std::holds_alternative<Number>(cell.value);
        const int tw = text_width(text, cell.style.bold);
        const int tx = numeric ? std::max(x0 + 3, x1 - 3 - tw) : x0 + 3;
        const int ty = y0 + (box.area.rows() > 1 ? (y1 - y0 - detail::kGlyphHeight) / 2 : text_dy);
        canvas.text(tx, ty, text, parse_hex(cell.style.font_color, kBlack), cell.style.bold, x0 + 1, y0 + 1, x1 - 1,
                    y1 - 1);
    }
    if (opts.show_gridlines) {
        canvas.hline(left, int(width), int(height) - 1, kGrid);
        canvas.vline(int(width) - 1, top, int(height), kGrid);
    }

    if (opts.show_headers_ruler) {
        canvas.fill(0, 0, int(width), top, kRulerFill);
        canvas.fill(0, 0, left, int(height), kRulerFill);
        for (std::uint32_t c = 0; c < range.columns(); ++c) {
            const int x0 = left + int(c) * cw;
            auto label = decode_utf8(column_label(range.start.col + c));
            canvas.vline(x0, 0, top, kRulerLine);
            canvas.text(x0 + (cw - text_width(label, false)) / 2, text_dy, label, kRulerText, false, x0 + 1, 0,
                        x0 + cw, top);
        }
        for (std::uint32_t r = 0; r < range.rows(); ++r) {
            const int y0 = top + int(r) * ch;
            auto label = decode_utf8(std::to_string(range.start.row + r));
            canvas.hline(0, left, y0, kRulerLine);
            canvas.text(left - 4 - text_width(label, false), y0 + text_dy, label, kRulerText, false, 1, y0 + 1,
                        left - 1, y0 + ch);
        }
        canvas.hline(0, int(width), top - 1, kRulerLine);
        canvas.vline(left - 1, 0, int(height), kRulerLine);
    }

    return {width, height, detail::encode_png(canvas.pixels(), width, height)};
}

} // namespace sheetagent::convert
