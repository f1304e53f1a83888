#include "sheetagent/workbook.hpp"

#include "sheetagent/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstdio>

namespace sheetagent {
namespace {

// Howard Hinnant's civil-date algorithms (proleptic Gregorian).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d)
{
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d)
{
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y += m <= 2;
}

const std::int64_t kEpoch1900 = days_from_civil(1899, 12, 30);
const std::int64_t kEpoch1904 = days_from_civil(1904, 1, 1);

std::string format_number(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc())
        return std::to_string(v);
    return std::string(buf, ptr);
}

} // namespace

std::string display_text(const CellValue& v)
{
    struct Visitor
    {
        std::string operator()(const Empty&) const { return {}; }
        std::string operator()(const Text& t) const { return t.value; }
        std::string operator()(const Number& n) const { return format_number(n.value); }
        std::string operator()(const Boolean& b) const { return b.value ? "TRUE" : "FALSE"; }
        std::string operator()(const DateTime& d) const { return d.iso; }
        std::string operator()(const ErrorCode& e) const { return e.code; }
    };
    return std::visit(Visitor{}, v);
}

std::string_view type_name(const CellValue& v)
{
    static constexpr std::string_view kNames[] = {"empty", "string", "number", "boolean", "date", "error"};
    return kNames[v.index()];
}

std::string excel_serial_to_iso(double serial, bool date1904)
{
    auto whole = static_cast<std::int64_t>(std::floor(serial));
    auto seconds = static_cast<std::int64_t>(std::llround((serial - static_cast<double>(whole)) * 86400.0));
    if (seconds >= 86400) {
        ++whole;
        seconds -= 86400;
    }

    std::int64_t days;
    if (date1904)
        days = kEpoch1904 + whole;
    else if (whole < 60)
        days = kEpoch1900 + whole + 1; // serials before the phantom 1900-02-29
    else if (whole == 60)
        days = days_from_civil(1900, 2, 28);
    else
        days = kEpoch1900 + whole;

    std::int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[40];
    if (seconds == 0)
        std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
    else
        std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lld", static_cast<long long>(y), m, d,
                      static_cast<long long>(seconds / 3600), static_cast<long long>(seconds / 60 % 60),
                      static_cast<long long>(seconds % 60));
    return buf;
}

std::optional<double> iso_to_excel_serial(std::string_view iso)
{
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    std::string text(iso);
    int n = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &n) != 3 || n != 10)
        return std::nullopt;
    if (text.size() > 10) {
        int n2 = 0;
        if ((text[10] != 'T' && text[10] != ' ') ||
            std::sscanf(text.c_str() + 11, "%2d:%2d:%2d%n", &h, &mi, &s, &n2) != 3 || 11 + n2 != int(text.size()))
            return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 59)
        return std::nullopt;
    auto days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    std::int64_t check_y;
    unsigned check_m, check_d;
    civil_from_days(days, check_y, check_m, check_d);
    if (check_m != unsigned(mo) || check_d != unsigned(d))
        return std::nullopt;
    double serial = static_cast<double>(days - kEpoch1900);
    if (serial < 61)
        serial -= 1; // undo the phantom leap day
    return serial + (h * 3600 + mi * 60 + s) / 86400.0;
}

bool is_date_format(std::uint32_t num_fmt_id, std::string_view code)
{
    if ((num_fmt_id >= 14 && num_fmt_id <= 22) || (num_fmt_id >= 45 && num_fmt_id <= 47))
        return true;
    if (num_fmt_id < 164)
        return false;
    bool quoted = false;
    int bracket = 0;
    for (std::size_t i = 0; i < code.size(); ++i) {
        char c = code[i];
        if (quoted) {
            quoted = c != '"';
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == '\\' || c == '_' || c == '*') {
            ++i;
        } else if (c == '[') {
            ++bracket;
        } else if (c == ']') {
            bracket = std::max(0, bracket - 1);
        } else if (bracket == 0) {
            switch (std::tolower(static_cast<unsigned char>(c))) {
            case 'd': case 'm': case 'y': case 'h': case 's': return true;
            default: break;
            }
        }
    }
    return false;
}

Sheet::Sheet(std::string name, std::shared_ptr<const std::vector<CellStyle>> styles)
    : name_(std::move(name)), styles_(std::move(styles))
{
    if (!styles_ || styles_->empty())
        styles_ = std::make_shared<const std::vector<CellStyle>>(1);
}

const CellStyle& Sheet::style(std::uint32_t style_id) const
{
    return style_id < styles_->size() ? (*styles_)[style_id] : styles_->front();
}

const CellStyle& Sheet::default_style() const
{
    return styles_->front();
}

void Sheet::set_cell(CellRef ref, CellValue value, std::uint32_t style_id, std::optional<std::string> formula)
{
    if (!styles_)
        styles_ = std::make_shared<const std::vector<CellStyle>>(1);
    if (style_id >= styles_->size())
        style_id = 0;
    cells_[ref] = CellEntry{std::move(value), style_id, std::move(formula)};
}

void Sheet::add_merge(const RangeRef& range)
{
    for (const auto& existing : merged_)
        if (existing.intersects(range))
            return; // first writer wins; overlapping merges are invalid OOXML
    if (range.area() > 1)
        merged_.push_back(range);
}

CellView get_cell(const Sheet& sheet, CellRef ref)
{
    auto it = sheet.cells().find(ref);
    if (it == sheet.cells().end())
        return {Empty{}, sheet.default_style()};
    return {it->second.value, sheet.style(it->second.style_id)};
}

std::optional<RangeRef> used_range(const Sheet& sheet)
{
    std::optional<RangeRef> box;
    const auto& base = sheet.default_style();
    for (const auto& [ref, entry] : sheet.cells()) {
        if (is_empty(entry.value) && sheet.style(entry.style_id) == base)
            continue;
        if (!box) {
            box = RangeRef::single(ref);
            continue;
        }
        box->start.col = std::min(box->start.col, ref.col);
        box->start.row = std::min(box->start.row, ref.row);
        box->end.col = std::max(box->end.col, ref.col);
        box->end.row = std::max(box->end.row, ref.row);
    }
    return box;
}

std::optional<RangeRef> merged_region_at(const Sheet& sheet, CellRef ref)
{
    for (const auto& m : sheet.merged())
        if (m.contains(ref))
            return m;
    return std::nullopt;
}

Workbook::Workbook(std::filesystem::path source, std::vector<Sheet> sheets)
    : source_(std::move(source)), sheets_(std::move(sheets))
{}

const Sheet* Workbook::find_sheet(std::string_view name) const
{
    for (const auto& s : sheets_)
        if (s.name() == name)
            return &s;
    return nullptr;
}

const Sheet& Workbook::sheet(std::string_view name) const
{
    if (const auto* s = find_sheet(name))
        return *s;
    throw UnknownSheet(std::string(name));
}

} // namespace sheetagent
