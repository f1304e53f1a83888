#include "layout.hpp"

#include "sheetagent/error.hpp"

#include <algorithm>
#include <limits>

namespace sheetagent::convert::detail {

void check_bounds(const RangeRef& range)
{
    auto ok = [](CellRef c) { return c.col >= 1 && c.row >= 1 && c.col <= kMaxColumns && c.row <= kMaxRows; };
    if (!ok(range.start) || !ok(range.end) || range.start.col > range.end.col || range.start.row > range.end.row)
        throw RangeOutOfBounds("range " + format_range(range) + " is outside the sheet grid");
}

Layout make_layout(const Sheet& sheet, const RangeRef& range)
{
    check_bounds(range);
    Layout out{range, {}, {}};
    constexpr auto kFree = std::numeric_limits<std::uint32_t>::max();
    out.owner.assign(range.area(), kFree);

    auto claim = [&](const RangeRef& area, std::uint32_t index) {
        for (auto r = area.start.row; r <= area.end.row; ++r)
            for (auto c = area.start.col; c <= area.end.col; ++c)
                out.owner[std::size_t(r - range.start.row) * range.columns() + (c - range.start.col)] = index;
    };

    for (const auto& m : sheet.merged()) {
        if (!m.intersects(range))
            continue;
        RangeRef clipped{{std::max(m.start.col, range.start.col), std::max(m.start.row, range.start.row)},
                         {std::min(m.end.col, range.end.col), std::min(m.end.row, range.end.row)}};
        out.boxes.push_back({clipped, m.start});
        claim(clipped, static_cast<std::uint32_t>(out.boxes.size() - 1));
    }
    for (auto r = range.start.row; r <= range.end.row; ++r)
        for (auto c = range.start.col; c <= range.end.col; ++c) {
            auto& slot = out.owner[std::size_t(r - range.start.row) * range.columns() + (c - range.start.col)];
            if (slot != kFree)
                continue;
            out.boxes.push_back({RangeRef{{c, r}, {c, r}}, {c, r}});
            slot = static_cast<std::uint32_t>(out.boxes.size() - 1);
        }
    return out;
}

} // namespace sheetagent::convert::detail
