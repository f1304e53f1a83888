#include "sheetagent/sketch.hpp"
#include "text.hpp"

#include <set>

namespace sheetagent::sketch {
namespace {

class Validator
{
public:
    Validator(const TableSketch& s, const Sheet& sheet) : s_(s), sheet_(sheet) {}

    std::vector<Violation> run()
    {
        ranges();
        header("row_header", s_.row_header);
        header("column_header", s_.column_header);
        properties();
        return std::move(out_);
    }

private:
    void error(std::optional<RangeRef> where, std::string msg)
    {
        out_.push_back({Severity::Error, where, std::move(msg)});
    }

    void ranges()
    {
        const auto table = format_range(s_.table_range);
        auto used = used_range(sheet_);
        if (!used) {
            error(s_.table_range, "table_range " + table + " lies on an empty sheet");
        } else if (!used->contains(s_.table_range)) {
            std::string msg = "table_range " + table + " is not inside the used range " + format_range(*used);
            if (s_.table_range.end.row > used->end.row)
                msg += "; the actual data ends before row " + std::to_string(s_.table_range.end.row) +
                       " (last used row is " + std::to_string(used->end.row) + ")";
            if (s_.table_range.end.col > used->end.col)
                msg += "; the actual data ends before column " + column_label(s_.table_range.end.col);
            error(s_.table_range, std::move(msg));
        }
        if (!s_.table_range.contains(s_.data_range))
            error(s_.data_range, "data_range " + format_range(s_.data_range) + " is not inside table_range " + table);
    }

    void header(const std::string& path, const std::vector<HeaderNode>& nodes)
    {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto& n = nodes[i];
            const auto where = path + "." + n.name;
            const auto span = n.span();
            if (!s_.table_range.contains(span))
                error(span, where + " span " + format_range(span) + " is outside table_range " +
                                format_range(s_.table_range));
            for (std::size_t j = 0; j < i; ++j)
                if (nodes[j].span().intersects(span))
                    error(span, where + " span " + format_range(span) + " overlaps sibling " + nodes[j].name + " (" +
                                    format_range(nodes[j].span()) + ")");
            check_value(n, where);
            if (n.children.empty())
                leaves_.insert(detail::normalize_ws(n.value));
            header(where + ".children", n.children);
        }
    }

    void check_value(const HeaderNode& n, const std::string& where)
    {
        auto anchor = n.start_index;
        if (auto m = merged_region_at(sheet_, anchor))
            anchor = m->start;
        auto actual = detail::normalize_ws(display_text(get_cell(sheet_, anchor).value));
        auto claimed = detail::normalize_ws(n.value);
        if (actual != claimed)
            error(RangeRef::single(n.start_index), where + " at " + format_a1(n.start_index) + " has value '" +
                                                       n.value + "' but the cell contains '" + actual +
                                                       "' (value mismatch)");
    }

    void properties()
    {
        for (const auto& [key, p] : s_.data_properties)
            if (!leaves_.count(detail::normalize_ws(key)))
                out_.push_back({Severity::Warning, std::nullopt,
                                "data_properties key '" + key + "' matches no leaf header value"});
    }

    const TableSketch& s_;
    const Sheet& sheet_;
    std::set<std::string> leaves_;
    std::vector<Violation> out_;
};

} // namespace

std::vector<Violation> validate_sketch(const TableSketch& s, const Workbook& wb)
{
    const auto* sheet = wb.find_sheet(s.sheet_name);
    if (!sheet)
        return {{Severity::Error, std::nullopt, "unknown sheet_name '" + s.sheet_name + "'"}};
    return Validator(s, *sheet).run();
}

} // namespace sheetagent::sketch
