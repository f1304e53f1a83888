#include "layout.hpp"
#include "sheetagent/convert.hpp"

#include <cmath>
#include <cstdio>

namespace sheetagent::convert {
namespace {

// "0", "0.00", "#,##0", "#,##0.000": grouping flag and decimal count.
bool plain_decimal(const std::string& fmt, bool& grouped, int& decimals)
{
    std::string_view f(fmt);
    grouped = f.starts_with("#,##0");
    if (grouped)
        f.remove_prefix(4);
    if (f.empty() || f.front() != '0')
        return false;
    f.remove_prefix(1);
    decimals = 0;
    if (f.empty())
        return true;
    if (f.front() != '.')
        return false;
    f.remove_prefix(1);
    for (char c : f) {
        if (c != '0')
            return false;
        ++decimals;
    }
    return decimals > 0 && decimals <= 15;
}

std::string group_thousands(const std::string& digits)
{
    auto dot = digits.find('.');
    std::string whole = digits.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : digits.substr(dot);
    std::string sign;
    if (!whole.empty() && whole.front() == '-') {
        sign = "-";
        whole.erase(0, 1);
    }
    std::string out;
    for (std::size_t i = 0; i < whole.size(); ++i) {
        if (i > 0 && (whole.size() - i) % 3 == 0)
            out += ',';
        out += whole[i];
    }
    return sign + out + frac;
}

} // namespace

std::string cell_text(const CellView& cell)
{
    if (const auto* n = std::get_if<Number>(&cell.value); n && std::isfinite(n->value)) {
        bool grouped = false;
        int decimals = 0;
        if (plain_decimal(cell.style.number_format, grouped, decimals)) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.*f", decimals, n->value);
            std::string s = buf;
            if (s == "-0" || (s.starts_with("-0.") && s.find_first_not_of("-0.") == std::string::npos))
                s.erase(0, 1);
            return grouped ? group_thousands(s) : s;
        }
    }
    return display_text(cell.value);
}

std::string latex_escape(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "\\&"; break;
        case '%': out += "\\%"; break;
        case '$': out += "\\$"; break;
        case '#': out += "\\#"; break;
        case '_': out += "\\_"; break;
        case '{': out += "\\{"; break;
        case '}': out += "\\}"; break;
        case '~': out += "\\textasciitilde{}"; break;
        case '^': out += "\\textasciicircum{}"; break;
        case '\\': out += "\\textbackslash{}"; break;
        case '\r': break;
        case '\n': out += ' '; break;
        default: out += c;
        }
    }
    return out;
}

std::string range_to_latex(const Sheet& sheet, const RangeRef& range)
{
    auto layout = detail::make_layout(sheet, range);
    const auto cols = range.columns();
    const auto rows = range.rows();

    std::string out = "\\begin{tabular}{|";
    for (std::uint32_t c = 0; c < cols; ++c)
        out += "l|";
    out += "}\n\\hline\n";

    for (std::uint32_t r = 0; r < rows; ++r) {
        std::string line;
        for (std::uint32_t c = 0; c < cols;) {
            const auto& box = layout.boxes[layout.at(r, c)];
            const auto width = box.area.columns();
            const auto height = box.area.rows();
            const std::string spec = c == 0 ? "|c|" : "c|";
            std::string content;
            if (box.area.start.row == range.start.row + r) {
                content = latex_escape(cell_text(get_cell(sheet, box.anchor)));
                if (height > 1)
                    content = "\\multirow{" + std::to_string(height) + "}{*}{" + content + "}";
            }
            // covered slots of a multirow keep an empty placeholder of equal width
            if (width > 1)
                content = "\\multicolumn{" + std::to_string(width) + "}{" + spec + "}{" + content + "}";
            if (c > 0)
                line += " & ";
            line += content;
            c += width;
        }
        out += line + " \\\\\n";

        if (r + 1 == rows) {
            out += "\\hline\n";
            continue;
        }
        // rule only where the slot below belongs to a different box
        std::string clines;
        bool all = true;
        for (std::uint32_t c = 0; c < cols;) {
            if (layout.at(r, c) == layout.at(r + 1, c)) {
                all = false;
                ++c;
                continue;
            }
            auto start = c;
            while (c < cols && layout.at(r, c) != layout.at(r + 1, c))
                ++c;
            clines += "\\cline{" + std::to_string(start + 1) + "-" + std::to_string(c) + "}";
        }
        out += all ? "\\hline\n" : clines.empty() ? std::string{} : clines + "\n";
    }
    out += "\\end{tabular}\n";
    return out;
}

} // namespace sheetagent::convert
