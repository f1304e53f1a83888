#include "latex_oracle.hpp"
#include "png_decode.hpp"
#include "sheetagent/convert.hpp"
#include "sheetagent/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace sheetagent;
using namespace sheetagent::convert;
using namespace testing::latex;

namespace {

std::shared_ptr<const std::vector<CellStyle>> fill_styles(const std::vector<std::string>& fills)
{
    auto styles = std::make_shared<std::vector<CellStyle>>(1);
    for (const auto& f : fills) {
        CellStyle s;
        s.fill_color = f;
        styles->push_back(s);
    }
    return styles;
}

} // namespace

TEST_CASE("latex: single cell")
{
    Sheet s("S", nullptr);
    s.set_cell(parse_a1("A1"), Text{"Hi"});
    auto latex = range_to_latex(s, parse_range("A1"));
    CHECK(latex.starts_with("\\begin{tabular}{|l|}"));
    CHECK(latex.ends_with("\\end{tabular}\n"));
    auto rows = parse_tabular(latex);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 1);
    CHECK(rows[0][0].content == "Hi");
}

TEST_CASE("latex: merged header fixture")
{
    auto wb = load_workbook(testing::fixture("styles.xlsx"));
    auto latex = range_to_latex(wb.sheet("Headers"), parse_range("B1:C2"));
    CHECK(latex.find("\\multicolumn{2}{|c|}{Country}") != std::string::npos);
    auto rows = parse_tabular(latex);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].size() == 1);
    CHECK(rows[0][0].width == 2);
    REQUIRE(rows[1].size() == 2);
    CHECK(rows[1][0].content == "State");
    CHECK(rows[1][1].content == "City");
    CHECK(tiles_exactly(rows, 2, 2));
}

TEST_CASE("latex: escapes")
{
    Sheet s("S", nullptr);
    s.set_cell(parse_a1("A1"), Text{"50% & up"});
    auto latex = range_to_latex(s, parse_range("A1"));
    CHECK(latex.find("50\\% \\& up") != std::string::npos);
    CHECK(latex_escape("a_b#c$d{e}f~g^h\\i\nj") == oracle_escape("a_b#c$d{e}f~g^h\\i\nj"));
}

TEST_CASE("latex: multirow leaves blank covered slots")
{
    Sheet s("S", nullptr);
    s.set_cell(parse_a1("A1"), Text{"Tall"});
    s.add_merge(parse_range("A1:A3"));
    s.set_cell(parse_a1("B2"), Text{"Wide"});
    s.add_merge(parse_range("B2:C3"));
    auto latex = range_to_latex(s, parse_range("A1:C3"));
    CHECK(latex.find("\\multirow{3}{*}{Tall}") != std::string::npos);
    CHECK(latex.find("\\multicolumn{2}{c|}{\\multirow{2}{*}{Wide}}") != std::string::npos);
    CHECK(latex.find("\\cline{2-3}") != std::string::npos);
    auto rows = parse_tabular(latex);
    CHECK(tiles_exactly(rows, 3, 3));
}

TEST_CASE("latex: number formats")
{
    auto styles = std::make_shared<std::vector<CellStyle>>(4);
    (*styles)[1].number_format = "0.00";
    (*styles)[2].number_format = "#,##0";
    (*styles)[3].number_format = "0%";
    Sheet s("S", styles);
    s.set_cell(parse_a1("A1"), Number{3.14159}, 1);
    s.set_cell(parse_a1("B1"), Number{1234567}, 2);
    s.set_cell(parse_a1("C1"), Number{0.25}, 3);
    s.set_cell(parse_a1("D1"), Number{-0.001}, 1);
    s.set_cell(parse_a1("E1"), Number{2.5});
    auto rows = parse_tabular(range_to_latex(s, parse_range("A1:E1")));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0][0].content == "3.14");
    CHECK(rows[0][1].content == "1,234,567");
    CHECK(rows[0][2].content == "0.25");
    CHECK(rows[0][3].content == "0.00");
    CHECK(rows[0][4].content == "2.5");
}

TEST_CASE("latex: randomized merge layouts tile exactly and escape cleanly")
{
    std::mt19937 rng(20240601);
    const std::string alphabet = "ab &%$#_{}~^\\\nxyz12";
    for (int trial = 0; trial < 200; ++trial) {
        const std::uint32_t gw = 1 + rng() % 8, gh = 1 + rng() % 8;
        Sheet s("S", nullptr);
        std::vector<RangeRef> merges;
        for (int k = 0; k < 6; ++k) {
            std::uint32_t c0 = 1 + rng() % gw, r0 = 1 + rng() % gh;
            std::uint32_t c1 = c0 + rng() % 3, r1 = r0 + rng() % 3;
            RangeRef m{{c0, r0}, {c1, r1}};
            bool clash = m.area() == 1;
            for (const auto& e : merges)
                clash = clash || e.intersects(m);
            if (!clash) {
                merges.push_back(m);
                s.add_merge(m);
            }
        }
        std::map<CellRef, std::string> texts;
        for (std::uint32_t r = 1; r <= gh + 2; ++r)
            for (std::uint32_t c = 1; c <= gw + 2; ++c) {
                std::string t;
                for (auto n = rng() % 6; n > 0; --n)
                    t += alphabet[rng() % alphabet.size()];
                s.set_cell({c, r}, Text{t});
                texts[{c, r}] = t;
            }
        // sub-range that may clip merges on any side
        std::uint32_t c0 = 1 + rng() % gw, r0 = 1 + rng() % gh;
        RangeRef range{{c0, r0},
                       {c0 + std::uint32_t(rng() % (gw - c0 + 1)), r0 + std::uint32_t(rng() % (gh - r0 + 1))}};

        auto latex = range_to_latex(s, range);
        auto rows = parse_tabular(latex);
        std::map<std::pair<std::uint32_t, std::uint32_t>, ParsedCell> anchors;
        INFO("trial " << trial << " range " << format_range(range) << "\n" << latex);
        REQUIRE(tiles_exactly(rows, range.rows(), range.columns(), &anchors));

        // spans and contents agree with the clipped merges
        for (const auto& [pos, cell] : anchors) {
            CellRef at{range.start.col + pos.second, range.start.row + pos.first};
            RangeRef expect{at, at};
            CellRef source = at;
            for (const auto& m : merges)
                if (m.contains(at)) {
                    expect = {{std::max(m.start.col, range.start.col), std::max(m.start.row, range.start.row)},
                              {std::min(m.end.col, range.end.col), std::min(m.end.row, range.end.row)}};
                    source = m.start;
                }
            CHECK(expect.start == at);
            CHECK(cell.width == expect.columns());
            CHECK(cell.height == expect.rows());
            CHECK(cell.content == trim(oracle_escape(texts[source]))); // cell padding is insignificant
            CHECK(escape_clean(cell.content));
        }
    }
}

TEST_CASE("latex: out of bounds")
{
    Sheet s("S", nullptr);
    CHECK_THROWS_AS(range_to_latex(s, RangeRef{{0, 1}, {2, 2}}), RangeOutOfBounds);
    CHECK_THROWS_AS(range_to_latex(s, RangeRef{{1, 1}, {kMaxColumns + 1, 2}}), RangeOutOfBounds);
}

TEST_CASE("image: single unstyled cell")
{
    Sheet s("S", nullptr);
    RenderOptions opts;
    opts.show_headers_ruler = false;
    auto img = range_to_image(s, parse_range("A1"), opts);
    CHECK(img.width_px == 96);
    CHECK(img.height_px == 24);
    auto d = testing::decode_png(img.png);
    CHECK(d.width == 96);
    CHECK(d.height == 24);
    CHECK(d.at(48, 12) == std::array<int, 4>{255, 255, 255, 255});
}

TEST_CASE("image: fill probe")
{
    Sheet s("S", fill_styles({"FF0000"}));
    s.set_cell(parse_a1("A1"), Empty{}, 1);
    RenderOptions opts;
    opts.show_headers_ruler = false;
    auto d = testing::decode_png(range_to_image(s, parse_range("A1"), opts).png);
    CHECK(d.at(48, 12) == std::array<int, 4>{255, 0, 0, 255});
}

TEST_CASE("image: merged region is one box")
{
    auto wb = load_workbook(testing::fixture("styles.xlsx"));
    RenderOptions opts;
    opts.show_headers_ruler = false;
    auto d = testing::decode_png(range_to_image(wb.sheet("Headers"), parse_range("B1:C2"), opts).png);
    CHECK(d.width == 192);
    // the B|C boundary inside the merge carries the fill, not a gridline
    CHECK(d.at(96, 3) == std::array<int, 4>{255, 0, 0, 255});
    // on row 2 the same boundary is a gridline
    CHECK(d.at(96, 24 + 20) == std::array<int, 4>{0xD0, 0xD0, 0xD0, 255});
}

TEST_CASE("image: dimension law, probes and determinism on random ranges")
{
    std::mt19937 rng(99);
    const std::vector<std::string> palette = {"FF0000", "00FF00", "0000FF", "123456", "ABCDEF"};
    auto styles = fill_styles(palette);
    Sheet s("S", styles);
    std::map<CellRef, std::string> fills;
    for (int k = 0; k < 400; ++k) {
        CellRef at{1 + std::uint32_t(rng() % 40), 1 + std::uint32_t(rng() % 60)};
        auto id = 1 + rng() % palette.size();
        s.set_cell(at, Empty{}, static_cast<std::uint32_t>(id));
        fills[at] = palette[id - 1];
    }
    int rendered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        RenderOptions opts;
        opts.cell_width_px = 4 + rng() % 120;
        opts.cell_height_px = 4 + rng() % 40;
        opts.show_headers_ruler = rng() % 2;
        opts.show_gridlines = rng() % 2;
        CellRef a{1 + std::uint32_t(rng() % 40), 1 + std::uint32_t(rng() % 60)};
        CellRef b{1 + std::uint32_t(rng() % 40), 1 + std::uint32_t(rng() % 60)};
        auto range = RangeRef::normalize(a, b);

        const std::uint64_t left = opts.show_headers_ruler ? 48 : 0;
        const std::uint64_t top = opts.show_headers_ruler ? opts.cell_height_px : 0;
        const std::uint64_t w = left + std::uint64_t(range.columns()) * opts.cell_width_px;
        const std::uint64_t h = top + std::uint64_t(range.rows()) * opts.cell_height_px;
        INFO("trial " << trial << " " << format_range(range));
        if (w > 8192 || h > 16384) {
            CHECK_THROWS_AS(range_to_image(s, range, opts), RangeTooLarge);
            continue;
        }
        auto img = range_to_image(s, range, opts);
        auto d = testing::decode_png(img.png);
        REQUIRE(d.width == w);
        REQUIRE(d.height == h);
        CHECK(img.width_px == w);
        CHECK(img.height_px == h);
        for (const auto& [at, hex] : fills) {
            if (!range.contains(at))
                continue;
            auto x = left + (at.col - range.start.col) * opts.cell_width_px + 2;
            auto y = top + (at.row - range.start.row) * opts.cell_height_px + 2;
            auto v = std::stoul(hex, nullptr, 16);
            CHECK(d.at(x, y) == std::array<int, 4>{int(v >> 16), int(v >> 8 & 255), int(v & 255), 255});
        }
        CHECK(range_to_image(s, range, opts).png == img.png);
        ++rendered;
    }
    CHECK(rendered > 10);
}

TEST_CASE("image: size bound")
{
    Sheet s("S", nullptr);
    // 200 columns x 96 px = 19200 px wide
    CHECK_THROWS_AS(range_to_image(s, RangeRef{{1, 1}, {200, 800}}), RangeTooLarge);
    try {
        range_to_image(s, RangeRef{{1, 1}, {200, 800}});
    } catch (const RangeTooLarge& e) {
        CHECK(std::string(e.what()).find("8192x16384") != std::string::npos);
    }
    RenderOptions opts;
    opts.show_headers_ruler = false;
    CHECK_NOTHROW(range_to_image(s, RangeRef{{1, 1}, {85, 2}}, opts)); // 8160 px
    CHECK_THROWS_AS(range_to_image(s, RangeRef{{1, 1}, {86, 2}}, opts), RangeTooLarge);
    CHECK_NOTHROW(range_to_image(s, RangeRef{{1, 1}, {1, 682}}, opts)); // 16368 px
    CHECK_THROWS_AS(range_to_image(s, RangeRef{{1, 1}, {1, 683}}, opts), RangeTooLarge);
    opts.cell_width_px = 3;
    CHECK_THROWS_AS(range_to_image(s, parse_range("A1"), opts), std::invalid_argument);
}

TEST_CASE("image: text is drawn in the font colour")
{
    auto styles = std::make_shared<std::vector<CellStyle>>(2);
    (*styles)[1].font_color = "0000FF";
    Sheet s("S", styles);
    s.set_cell(parse_a1("A1"), Text{"HHHH"}, 1);
    RenderOptions opts;
    opts.show_headers_ruler = false;
    auto d = testing::decode_png(range_to_image(s, parse_range("A1"), opts).png);
    int blue = 0;
    for (std::uint32_t y = 0; y < d.height; ++y)
        for (std::uint32_t x = 0; x < d.width; ++x)
            blue += d.at(x, y) == std::array<int, 4>{0, 0, 255, 255};
    CHECK(blue > 20);
}
