#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sheetagent {

inline constexpr std::uint32_t kMaxColumns = 16384;
inline constexpr std::uint32_t kMaxRows = 1048576;

/// A single cell address; both ordinals are 1-based.
struct CellRef
{
    std::uint32_t col = 1;
    std::uint32_t row = 1;

    friend bool operator==(const CellRef&, const CellRef&) = default;

    /// Row-major ordering, which is the order cells appear in sheet XML.
    friend std::strong_ordering operator<=>(const CellRef& a, const CellRef& b)
    {
        if (auto c = a.row <=> b.row; c != 0)
            return c;
        return a.col <=> b.col;
    }
};

/// Inclusive rectangle. Constructed through normalize() or parse_range() the
/// corners are always ordered.
struct RangeRef
{
    CellRef start;
    CellRef end;

    friend bool operator==(const RangeRef&, const RangeRef&) = default;

    std::uint32_t columns() const { return end.col - start.col + 1; }
    std::uint32_t rows() const { return end.row - start.row + 1; }
    std::uint64_t area() const { return std::uint64_t(columns()) * rows(); }

    bool contains(CellRef ref) const
    {
        return ref.col >= start.col && ref.col <= end.col && ref.row >= start.row && ref.row <= end.row;
    }

    bool contains(const RangeRef& other) const { return contains(other.start) && contains(other.end); }

    bool intersects(const RangeRef& other) const
    {
        return start.col <= other.end.col && other.start.col <= end.col && start.row <= other.end.row &&
               other.start.row <= end.row;
    }

    static RangeRef normalize(CellRef a, CellRef b);
    static RangeRef single(CellRef ref) { return {ref, ref}; }
};

/// Column ordinal to letters: 1 -> "A", 27 -> "AA".
std::string column_label(std::uint32_t col);

/// Letters to column ordinal; throws MalformedRef on bad input or overflow past XFD.
std::uint32_t parse_column_label(std::string_view letters);

CellRef parse_a1(std::string_view text);
std::string format_a1(CellRef ref);

/// Accepts "A1:D20" or a single "B7". Corners are normalized.
RangeRef parse_range(std::string_view text);
std::string format_range(const RangeRef& range);

/// Non-throwing variants for places that treat bad input as data.
std::optional<CellRef> try_parse_a1(std::string_view text);
std::optional<RangeRef> try_parse_range(std::string_view text);

} // namespace sheetagent
