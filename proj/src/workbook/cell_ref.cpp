#include "sheetagent/cell_ref.hpp"

#include "sheetagent/error.hpp"

#include <algorithm>
#include <cctype>

namespace sheetagent {

RangeRef RangeRef::normalize(CellRef a, CellRef b)
{
    return {
        {std::min(a.col, b.col), std::min(a.row, b.row)},
        {std::max(a.col, b.col), std::max(a.row, b.row)},
    };
}

std::string column_label(std::uint32_t col)
{
    std::string out;
    while (col > 0) {
        auto rem = (col - 1) % 26;
        out.push_back(static_cast<char>('A' + rem));
        col = (col - 1) / 26;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::uint32_t parse_column_label(std::string_view letters)
{
    if (letters.empty() || letters.size() > 3)
        throw MalformedRef("bad column label '" + std::string(letters) + "'");
    std::uint32_t col = 0;
    for (char ch : letters) {
        auto up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (up < 'A' || up > 'Z')
            throw MalformedRef("bad column label '" + std::string(letters) + "'");
        col = col * 26 + static_cast<std::uint32_t>(up - 'A' + 1);
    }
    if (col > kMaxColumns)
        throw MalformedRef("column '" + std::string(letters) + "' is beyond XFD");
    return col;
}

CellRef parse_a1(std::string_view text)
{
    std::size_t i = 0;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i])))
        ++i;
    auto letters = text.substr(0, i);
    auto digits = text.substr(i);
    if (letters.empty() || digits.empty())
        throw MalformedRef("malformed cell reference '" + std::string(text) + "'");
    if (digits.front() == '0')
        throw MalformedRef("row must start at 1 in '" + std::string(text) + "'");
    if (digits.size() > 7 || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw MalformedRef("malformed row in '" + std::string(text) + "'");

    std::uint32_t row = 0;
    for (char c : digits)
        row = row * 10 + static_cast<std::uint32_t>(c - '0');
    if (row > kMaxRows)
        throw MalformedRef("row beyond 1048576 in '" + std::string(text) + "'");
    return {parse_column_label(letters), row};
}

std::string format_a1(CellRef ref)
{
    return column_label(ref.col) + std::to_string(ref.row);
}

RangeRef parse_range(std::string_view text)
{
    auto colon = text.find(':');
    if (colon == std::string_view::npos)
        return RangeRef::single(parse_a1(text));
    if (text.find(':', colon + 1) != std::string_view::npos)
        throw MalformedRef("malformed range '" + std::string(text) + "'");
    return RangeRef::normalize(parse_a1(text.substr(0, colon)), parse_a1(text.substr(colon + 1)));
}

std::string format_range(const RangeRef& range)
{
    return format_a1(range.start) + ":" + format_a1(range.end);
}

std::optional<CellRef> try_parse_a1(std::string_view text)
{
    try {
        return parse_a1(text);
    } catch (const MalformedRef&) {
        return std::nullopt;
    }
}

std::optional<RangeRef> try_parse_range(std::string_view text)
{
    try {
        return parse_range(text);
    } catch (const MalformedRef&) {
        return std::nullopt;
    }
}

} // namespace sheetagent
