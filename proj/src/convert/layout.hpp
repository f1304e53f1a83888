#pragma once

#include "sheetagent/workbook.hpp"

#include <vector>

namespace sheetagent::convert::detail {

/// One drawn/emitted cell: a merged region clipped to the range, or a
/// single slot. `anchor` supplies value and style and may lie outside the
/// range when a merge is clipped.
struct Box
{
    RangeRef area;
    CellRef anchor;
};

struct Layout
{
    RangeRef range;
    std::vector<Box> boxes;
    std::vector<std::uint32_t> owner; // row-major slot -> box index

    std::uint32_t at(std::uint32_t row_offset, std::uint32_t col_offset) const
    {
        return owner[std::size_t(row_offset) * range.columns() + col_offset];
    }
};

/// Throws RangeOutOfBounds for corners outside the addressable grid.
void check_bounds(const RangeRef& range);

Layout make_layout(const Sheet& sheet, const RangeRef& range);

} // namespace sheetagent::convert::detail
