#include "sheetagent/error.hpp"
#include "sheetagent/workbook.hpp"
#include "sheetagent/zip_archive.hpp"
#include "xlsx_parts.hpp"
#include "xml_dom.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <set>

namespace sheetagent {
namespace {

// Default palette for `indexed` colors (ECMA-376 Part 1, 18.8.27).
constexpr const char* kIndexedColors[] = {
    "000000", "FFFFFF", "FF0000", "00FF00", "0000FF", "FFFF00", "FF00FF", "00FFFF", "000000", "FFFFFF", "FF0000",
    "00FF00", "0000FF", "FFFF00", "FF00FF", "00FFFF", "800000", "008000", "000080", "808000", "800080", "008080",
    "C0C0C0", "808080", "9999FF", "993366", "FFFFCC", "CCFFFF", "660066", "FF8080", "0066CC", "CCCCFF", "000080",
    "FF00FF", "FFFF00", "00FFFF", "800080", "800000", "008080", "0000FF", "00CCFF", "CCFFFF", "CCFFCC", "FFFF99",
    "99CCFF", "FF99CC", "CC99FF", "FFCC99", "3366FF", "33CCCC", "99CC00", "FFCC00", "FF9900", "FF6600", "666699",
    "969696", "003366", "339966", "003300", "333300", "993300", "993366", "333399", "333333",
};

std::string builtin_format(std::uint32_t id)
{
    static const std::map<std::uint32_t, std::string> kBuiltins = {
        {0, "General"},      {1, "0"},           {2, "0.00"},           {3, "#,##0"},       {4, "#,##0.00"},
        {9, "0%"},           {10, "0.00%"},      {11, "0.00E+00"},      {12, "# ?/?"},      {13, "# ?\?/??"},
        {14, "mm-dd-yy"},    {15, "d-mmm-yy"},   {16, "d-mmm"},         {17, "mmm-yy"},     {18, "h:mm AM/PM"},
        {19, "h:mm:ss AM/PM"}, {20, "h:mm"},     {21, "h:mm:ss"},       {22, "m/d/yy h:mm"}, {37, "#,##0 ;(#,##0)"},
        {38, "#,##0 ;[Red](#,##0)"}, {39, "#,##0.00;(#,##0.00)"}, {40, "#,##0.00;[Red](#,##0.00)"},
        {45, "mm:ss"},       {46, "[h]:mm:ss"},  {47, "mmss.0"},        {48, "##0.0E+0"},   {49, "@"},
    };
    auto it = kBuiltins.find(id);
    return it == kBuiltins.end() ? "General" : it->second;
}

std::uint32_t to_u32(const std::string& s, std::uint32_t fallback = 0)
{
    std::uint32_t v = fallback;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() ? v : fallback;
}

std::optional<std::string> parse_color(const xml::Element* color)
{
    if (!color)
        return std::nullopt;
    if (const auto* rgb = color->attr("rgb")) {
        std::string hex = rgb->size() == 8 ? rgb->substr(2) : *rgb;
        if (hex.size() != 6)
            return std::nullopt;
        std::transform(hex.begin(), hex.end(), hex.begin(), [](unsigned char c) { return std::toupper(c); });
        if (!std::all_of(hex.begin(), hex.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); }))
            return std::nullopt;
        return hex;
    }
    if (const auto* idx = color->attr("indexed")) {
        auto i = to_u32(*idx, 1000);
        if (i < std::size(kIndexedColors))
            return std::string(kIndexedColors[i]);
    }
    // Theme colors would need the theme part; they resolve to "unknown".
    return std::nullopt;
}

bool flag_on(const xml::Element* el)
{
    if (!el)
        return false;
    auto v = el->attr_or("val", "1");
    return v != "0" && v != "false";
}

struct StyleTable
{
    std::shared_ptr<std::vector<CellStyle>> styles = std::make_shared<std::vector<CellStyle>>();
    std::vector<bool> is_date;
};

StyleTable read_styles(const ZipArchive& zip, const std::string& part)
{
    StyleTable table;
    if (part.empty() || !zip.contains(part)) {
        table.styles->emplace_back();
        table.is_date.push_back(false);
        return table;
    }
    auto root = xml::parse(zip.read(part), part);

    std::map<std::uint32_t, std::string> custom;
    if (const auto* fmts = root->child("numFmts"))
        for (const auto* f : fmts->children_named("numFmt"))
            custom[to_u32(f->attr_or("numFmtId"))] = f->attr_or("formatCode");

    struct FontInfo { bool bold = false, italic = false; std::optional<std::string> color; };
    std::vector<FontInfo> fonts;
    if (const auto* fs = root->child("fonts"))
        for (const auto* f : fs->children_named("font"))
            fonts.push_back({flag_on(f->child("b")), flag_on(f->child("i")), parse_color(f->child("color"))});

    std::vector<std::optional<std::string>> fills;
    if (const auto* fs = root->child("fills")) {
        for (const auto* f : fs->children_named("fill")) {
            std::optional<std::string> color;
            if (const auto* pf = f->child("patternFill")) {
                auto pattern = pf->attr_or("patternType", "none");
                if (pattern != "none" && pattern != "gray125")
                    color = parse_color(pf->child("fgColor"));
            }
            fills.push_back(color);
        }
    }

    std::vector<std::uint8_t> borders;
    if (const auto* bs = root->child("borders")) {
        for (const auto* b : bs->children_named("border")) {
            std::uint8_t mask = kBorderNone;
            auto side = [&](const char* name, Border bit) {
                if (const auto* s = b->child(name)) {
                    auto style = s->attr_or("style", "none");
                    if (style != "none")
                        mask |= bit;
                }
            };
            side("top", kBorderTop);
            side("bottom", kBorderBottom);
            side("left", kBorderLeft);
            side("right", kBorderRight);
            side("start", kBorderLeft);
            side("end", kBorderRight);
            borders.push_back(mask);
        }
    }

    if (const auto* xfs = root->child("cellXfs")) {
        for (const auto* xf : xfs->children_named("xf")) {
            CellStyle style;
            auto fmt_id = to_u32(xf->attr_or("numFmtId", "0"));
            auto it = custom.find(fmt_id);
            style.number_format = it != custom.end() ? it->second : builtin_format(fmt_id);
            auto font_id = to_u32(xf->attr_or("fontId", "0"));
            if (font_id < fonts.size()) {
                style.bold = fonts[font_id].bold;
                style.italic = fonts[font_id].italic;
                style.font_color = fonts[font_id].color;
            }
            auto fill_id = to_u32(xf->attr_or("fillId", "0"));
            if (fill_id < fills.size())
                style.fill_color = fills[fill_id];
            auto border_id = to_u32(xf->attr_or("borderId", "0"));
            if (border_id < borders.size())
                style.borders = borders[border_id];
            table.styles->push_back(std::move(style));
            table.is_date.push_back(is_date_format(fmt_id, it != custom.end() ? it->second : std::string{}));
        }
    }
    if (table.styles->empty()) {
        table.styles->emplace_back();
        table.is_date.push_back(false);
    }
    return table;
}

std::vector<std::string> read_shared_strings(const ZipArchive& zip, const std::string& part)
{
    std::vector<std::string> out;
    if (part.empty() || !zip.contains(part))
        return out;
    auto root = xml::parse(zip.read(part), part);
    for (const auto* si : root->children_named("si"))
        out.push_back(si->run_text());
    return out;
}

double parse_double(const std::string& text, const std::string& part)
{
    const char* begin = text.data();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin)
        throw MalformedXml(part, "bad numeric cell value '" + text + "'");
    return v;
}

Sheet read_sheet(const ZipArchive& zip, const std::string& part, std::string name, const StyleTable& styles,
                 const std::vector<std::string>& shared, bool date1904)
{
    Sheet sheet(std::move(name), styles.styles);
    sheet.set_part_name(zip.find(part)->name); // stored spelling, so the patch writer matches it exactly
    auto root = xml::parse(zip.read(part), part);

    if (const auto* data = root->child("sheetData")) {
        std::uint32_t next_row = 1;
        for (const auto* row : data->children_named("row")) {
            std::uint32_t row_no = next_row;
            if (const auto* r = row->attr("r"))
                row_no = to_u32(*r, next_row);
            if (row_no < 1 || row_no > kMaxRows)
                throw MalformedXml(part, "row number out of range");
            next_row = row_no + 1;

            std::uint32_t next_col = 1;
            for (const auto* c : row->children_named("c")) {
                CellRef ref{next_col, row_no};
                if (const auto* r = c->attr("r")) {
                    try {
                        ref = parse_a1(*r);
                    } catch (const MalformedRef& e) {
                        throw MalformedXml(part, e.what());
                    }
                }
                next_col = ref.col + 1;

                auto style_id = to_u32(c->attr_or("s", "0"));
                if (style_id >= styles.styles->size())
                    style_id = 0;
                auto type = c->attr_or("t", "n");
                const auto* v = c->child("v");
                CellValue value = Empty{};
                if (type == "s") {
                    if (v) {
                        auto idx = to_u32(v->text, static_cast<std::uint32_t>(shared.size()));
                        if (idx >= shared.size())
                            throw MalformedXml(part, "shared string index out of range at " + format_a1(ref));
                        value = Text{shared[idx]};
                    }
                } else if (type == "inlineStr") {
                    if (const auto* is = c->child("is"))
                        value = Text{is->run_text()};
                } else if (type == "str") {
                    value = Text{v ? v->text : std::string{}};
                } else if (type == "b") {
                    if (v)
                        value = Boolean{v->text == "1" || v->text == "true"};
                } else if (type == "e") {
                    if (v)
                        value = ErrorCode{v->text};
                } else if (type == "d") {
                    if (v)
                        value = DateTime{v->text};
                } else if (v && !v->text.empty()) {
                    double number = parse_double(v->text, part);
                    if (styles.is_date[style_id] && number >= 0)
                        value = DateTime{excel_serial_to_iso(number, date1904)};
                    else
                        value = Number{number};
                }

                std::optional<std::string> formula;
                if (const auto* f = c->child("f"); f && !f->text.empty())
                    formula = f->text;
                sheet.set_cell(ref, std::move(value), style_id, std::move(formula));
            }
        }
    }

    if (const auto* merges = root->child("mergeCells")) {
        for (const auto* m : merges->children_named("mergeCell")) {
            try {
                sheet.add_merge(parse_range(m->attr_or("ref")));
            } catch (const MalformedRef& e) {
                throw MalformedXml(part, e.what());
            }
        }
    }
    return sheet;
}

} // namespace

namespace detail {

std::string resolve_target(const std::string& base_dir, const std::string& target)
{
    if (!target.empty() && target.front() == '/')
        return target.substr(1);
    std::vector<std::string> parts;
    auto push_segments = [&](const std::string& path) {
        std::size_t start = 0;
        while (start <= path.size()) {
            auto slash = path.find('/', start);
            auto seg = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
            if (seg == "..") {
                if (!parts.empty())
                    parts.pop_back();
            } else if (!seg.empty() && seg != ".") {
                parts.push_back(seg);
            }
            if (slash == std::string::npos)
                break;
            start = slash + 1;
        }
    };
    push_segments(base_dir);
    push_segments(target);
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty())
            out += '/';
        out += p;
    }
    return out;
}

std::map<std::string, Relationship> read_relationships(const ZipArchive& zip, const std::string& part_path)
{
    std::map<std::string, Relationship> out;
    auto slash = part_path.rfind('/');
    std::string dir = slash == std::string::npos ? std::string{} : part_path.substr(0, slash);
    std::string file = slash == std::string::npos ? part_path : part_path.substr(slash + 1);
    std::string rels = (dir.empty() ? "" : dir + "/") + "_rels/" + file + ".rels";
    if (!zip.contains(rels))
        return out;
    auto root = xml::parse(zip.read(rels), rels);
    for (const auto* r : root->children_named("Relationship")) {
        Relationship rel;
        rel.type = r->attr_or("Type");
        if (r->attr_or("TargetMode") == "External")
            continue;
        rel.target = resolve_target(dir, r->attr_or("Target"));
        out[r->attr_or("Id")] = std::move(rel);
    }
    return out;
}

std::string find_workbook_part(const ZipArchive& zip)
{
    auto rels = read_relationships(zip, "");
    for (const auto& [id, rel] : rels)
        if (rel.type.ends_with("/officeDocument"))
            return rel.target;
    if (zip.contains("xl/workbook.xml"))
        return "xl/workbook.xml";
    throw MissingPart("xl/workbook.xml");
}

} // namespace detail

Workbook load_workbook(const std::filesystem::path& path)
{
    auto zip = ZipArchive::open(path);
    auto workbook_part = detail::find_workbook_part(zip);
    if (!zip.contains(workbook_part))
        throw MissingPart(workbook_part);
    auto wb = xml::parse(zip.read(workbook_part), workbook_part);
    auto rels = detail::read_relationships(zip, workbook_part);

    bool date1904 = false;
    if (const auto* pr = wb->child("workbookPr")) {
        auto v = pr->attr_or("date1904", "0");
        date1904 = v == "1" || v == "true";
    }

    std::string styles_part, strings_part;
    for (const auto& [id, rel] : rels) {
        if (rel.type.ends_with("/styles"))
            styles_part = rel.target;
        else if (rel.type.ends_with("/sharedStrings"))
            strings_part = rel.target;
    }
    auto styles = read_styles(zip, styles_part);
    auto shared = read_shared_strings(zip, strings_part);

    std::vector<Sheet> sheets;
    std::set<std::string> names;
    if (const auto* list = wb->child("sheets")) {
        for (const auto* s : list->children_named("sheet")) {
            auto name = s->attr_or("name");
            auto it = rels.find(s->attr_or("id"));
            if (it == rels.end())
                throw MalformedXml(workbook_part, "sheet '" + name + "' has no relationship");
            if (!it->second.type.ends_with("/worksheet"))
                continue; // chartsheets and dialog sheets carry no cells
            if (!names.insert(name).second)
                throw MalformedXml(workbook_part, "duplicate sheet name '" + name + "'");
            if (!zip.contains(it->second.target))
                throw MissingPart(it->second.target);
            sheets.push_back(read_sheet(zip, it->second.target, name, styles, shared, date1904));
        }
    }
    if (sheets.empty())
        throw MalformedXml(workbook_part, "workbook contains no worksheets");
    return Workbook(path, std::move(sheets));
}

} // namespace sheetagent
