#include "sheetagent/cell_ref.hpp"
#include "sheetagent/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

using namespace sheetagent;

namespace {

// Column labels by counting: an odometer over A..Z with no zero digit.
std::vector<std::string> enumerate_labels(std::size_t n)
{
    std::vector<std::string> out;
    std::string cur = "A";
    while (out.size() < n) {
        out.push_back(cur);
        int i = static_cast<int>(cur.size()) - 1;
        while (i >= 0 && cur[i] == 'Z') {
            cur[i] = 'A';
            --i;
        }
        if (i < 0)
            cur.insert(cur.begin(), 'A');
        else
            ++cur[i];
    }
    return out;
}

} // namespace

TEST_CASE("parse_a1 basics")
{
    CHECK(parse_a1("A1") == CellRef{1, 1});
    CHECK(parse_a1("M4") == CellRef{13, 4});
    CHECK(parse_a1("u194") == CellRef{21, 194});
    CHECK(parse_a1("XFD1048576") == CellRef{kMaxColumns, kMaxRows});
}

TEST_CASE("column labels agree with the counting oracle")
{
    auto labels = enumerate_labels(20000);
    CHECK(labels[27] == "AB");
    CHECK(parse_a1("AB12") == CellRef{28, 12});
    CHECK(format_a1({27, 3}) == labels[26] + "3");
    CHECK(format_a1({27, 3}) == "AA3");
    for (std::uint32_t c = 1; c <= kMaxColumns; ++c) {
        REQUIRE(column_label(c) == labels[c - 1]);
        REQUIRE(parse_column_label(labels[c - 1]) == c);
    }
    CHECK(labels[kMaxColumns - 1] == "XFD");
}

TEST_CASE("format_a1 examples")
{
    CHECK(format_a1({1, 1}) == "A1");
    CHECK(format_a1({21, 194}) == "U194");
}

TEST_CASE("parse_a1 rejects malformed input")
{
    for (const char* bad : {"", "A", "1", "A0", "A01", "XFE1", "A1048577", "1A", "A-1", "A 1", "$A$1", "AAAA1", "A1:B2"})
        CHECK_THROWS_AS(parse_a1(bad), MalformedRef);
    CHECK_FALSE(try_parse_a1("A0").has_value());
    CHECK(try_parse_a1("b2") == CellRef{2, 2});
}

TEST_CASE("round trip over a 1000x1000 grid")
{
    for (std::uint32_t c = 1; c <= 1000; ++c)
        for (std::uint32_t r = 1; r <= 1000; ++r)
            REQUIRE(parse_a1(format_a1({c, r})) == CellRef{c, r});
}

TEST_CASE("parse_range")
{
    auto r = parse_range("A4:U194");
    CHECK(r.start == CellRef{1, 4});
    CHECK(r.end == CellRef{21, 194});
    CHECK(parse_range("B7") == RangeRef{{2, 7}, {2, 7}});
    CHECK(format_range(parse_range("B7")) == "B7:B7");
    CHECK_THROWS_AS(parse_range("A1:"), MalformedRef);
    CHECK_THROWS_AS(parse_range(":A1"), MalformedRef);
    CHECK_THROWS_AS(parse_range("A1:B2:C3"), MalformedRef);

    // normalization oracle: per-axis min/max of the two corners
    const char* corners[][2] = {{"D20", "A1"}, {"A20", "D1"}, {"D1", "A20"}, {"C3", "C3"}};
    for (auto& [a, b] : corners) {
        auto ca = parse_a1(a), cb = parse_a1(b);
        RangeRef expect{{std::min(ca.col, cb.col), std::min(ca.row, cb.row)},
                        {std::max(ca.col, cb.col), std::max(ca.row, cb.row)}};
        CHECK(parse_range(std::string(a) + ":" + b) == expect);
    }
    CHECK(parse_range("D20:A1") == RangeRef{{1, 1}, {4, 20}});
}

TEST_CASE("range geometry")
{
    auto r = parse_range("B2:D5");
    CHECK(r.columns() == 3);
    CHECK(r.rows() == 4);
    CHECK(r.area() == 12);
    CHECK(r.contains(CellRef{2, 2}));
    CHECK_FALSE(r.contains(CellRef{1, 2}));
    CHECK(r.contains(parse_range("C3:D4")));
    CHECK(r.intersects(parse_range("D5:F9")));
    CHECK_FALSE(r.intersects(parse_range("E1:F9")));
}
