#include "sheetagent/error.hpp"
#include "sheetagent/workbook.hpp"
#include "sheetagent/zip_archive.hpp"
#include "xml_dom.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <system_error>

namespace sheetagent {
namespace {

struct Splice
{
    std::size_t begin;
    std::size_t end;
    std::string text;
};

std::string number_text(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Serializes one <c> element; empty string means "drop the element".
std::string cell_xml(const std::string& ns, CellRef ref, const CellValue& value, const std::string* style)
{
    std::string head = "<" + ns + "c r=\"" + format_a1(ref) + "\"";
    if (style)
        head += " s=\"" + *style + "\"";

    struct Visitor
    {
        const std::string& ns;
        std::string& head;
        const std::string* style;

        std::string operator()(const Empty&) const { return style ? head + "/>" : std::string{}; }
        std::string operator()(const Number& n) const
        {
            if (!std::isfinite(n.value))
                return head + " t=\"e\"><" + ns + "v>#NUM!</" + ns + "v></" + ns + "c>";
            return head + "><" + ns + "v>" + number_text(n.value) + "</" + ns + "v></" + ns + "c>";
        }
        std::string operator()(const Text& t) const
        {
            return head + " t=\"inlineStr\"><" + ns + "is><" + ns + "t xml:space=\"preserve\">" + xml::escape(t.value) +
                   "</" + ns + "t></" + ns + "is></" + ns + "c>";
        }
        std::string operator()(const Boolean& b) const
        {
            return head + " t=\"b\"><" + ns + "v>" + (b.value ? "1" : "0") + "</" + ns + "v></" + ns + "c>";
        }
        std::string operator()(const DateTime& d) const
        {
            return head + " t=\"d\"><" + ns + "v>" + xml::escape(d.iso) + "</" + ns + "v></" + ns + "c>";
        }
        std::string operator()(const ErrorCode& e) const
        {
            return head + " t=\"e\"><" + ns + "v>" + xml::escape(e.code) + "</" + ns + "v></" + ns + "c>";
        }
    };
    return std::visit(Visitor{ns, head, style}, value);
}

/// "x:" when the element at `begin` is written as <x:name ...>, else "".
std::string prefix_at(const std::string& doc, std::size_t begin)
{
    auto stop = doc.find_first_of(" \t\r\n/>", begin + 1);
    auto qname = doc.substr(begin + 1, stop - begin - 1);
    auto colon = qname.find(':');
    return colon == std::string::npos ? std::string{} : qname.substr(0, colon + 1);
}

std::size_t close_tag_start(const std::string& doc, const xml::Element& el)
{
    return doc.rfind('<', el.end - 1);
}

std::string patch_sheet_xml(const std::string& doc, const std::string& part, const std::map<CellRef, CellValue>& edits)
{
    auto root = xml::parse(doc, part);
    const auto* data = root->child("sheetData");
    if (!data)
        throw MalformedXml(part, "worksheet has no sheetData");
    const auto ns = prefix_at(doc, data->begin);

    // Index existing rows and cells by position.
    std::map<std::uint32_t, const xml::Element*> rows;
    std::map<CellRef, const xml::Element*> cells;
    std::uint32_t next_row = 1;
    for (const auto* row : data->children_named("row")) {
        std::uint32_t r = next_row;
        if (const auto* attr = row->attr("r"))
            r = static_cast<std::uint32_t>(std::stoul(*attr));
        next_row = r + 1;
        rows[r] = row;
        std::uint32_t next_col = 1;
        for (const auto* c : row->children_named("c")) {
            CellRef ref{next_col, r};
            if (const auto* attr = c->attr("r"))
                ref = parse_a1(*attr);
            next_col = ref.col + 1;
            cells[ref] = c;
        }
    }

    std::map<std::uint32_t, std::map<std::uint32_t, const CellValue*>> by_row;
    for (const auto& [ref, value] : edits)
        by_row[ref.row][ref.col] = &value;

    std::vector<Splice> splices;
    // Insertions keyed by offset so several new elements at one point keep order.
    std::map<std::size_t, std::string> inserts;

    for (const auto& [row_no, cols] : by_row) {
        auto row_it = rows.find(row_no);
        if (row_it == rows.end()) {
            std::string row_xml = "<" + ns + "row r=\"" + std::to_string(row_no) + "\">";
            for (const auto& [col, value] : cols)
                row_xml += cell_xml(ns, {col, row_no}, *value, nullptr);
            row_xml += "</" + ns + "row>";
            auto after = rows.upper_bound(row_no);
            if (after != rows.end()) {
                inserts[after->second->begin] += row_xml;
            } else if (data->end == data->start_tag_end) {
                std::string open = doc.substr(data->begin, data->start_tag_end - data->begin);
                open.erase(open.size() - 2);
                splices.push_back({data->begin, data->end, open + ">" + row_xml + "</" + ns + "sheetData>"});
            } else {
                inserts[close_tag_start(doc, *data)] += row_xml;
            }
            continue;
        }

        const auto* row = row_it->second;
        std::string trailing;
        for (const auto& [col, value] : cols) {
            CellRef ref{col, row_no};
            if (auto c = cells.find(ref); c != cells.end()) {
                splices.push_back({c->second->begin, c->second->end, cell_xml(ns, ref, *value, c->second->attr("s"))});
                continue;
            }
            auto next = cells.upper_bound(ref);
            if (next != cells.end() && next->first.row == row_no)
                inserts[next->second->begin] += cell_xml(ns, ref, *value, nullptr);
            else
                trailing += cell_xml(ns, ref, *value, nullptr);
        }
        if (trailing.empty())
            continue;
        if (row->end == row->start_tag_end) {
            std::string open = doc.substr(row->begin, row->start_tag_end - row->begin);
            open.erase(open.size() - 2);
            splices.push_back({row->begin, row->end, open + ">" + trailing + "</" + ns + "row>"});
        } else {
            inserts[close_tag_start(doc, *row)] += trailing;
        }
    }

    for (auto& [at, text] : inserts)
        splices.push_back({at, at, std::move(text)});
    std::sort(splices.begin(), splices.end(), [](const Splice& a, const Splice& b) {
        return a.begin != b.begin ? a.begin > b.begin : a.end > b.end;
    });

    std::string out = doc;
    for (const auto& s : splices)
        out.replace(s.begin, s.end - s.begin, s.text);
    return out;
}

} // namespace

void write_patched_workbook(const Workbook& source, const CellEdits& edits, const std::filesystem::path& out_path)
{
    std::map<std::string, std::map<CellRef, CellValue>> per_part;
    for (const auto& [key, value] : edits) {
        const auto& sheet = source.sheet(key.first);
        if (sheet.part_name().empty())
            throw IoError("sheet '" + sheet.name() + "' was not loaded from an archive");
        per_part[sheet.part_name()][key.second] = value;
    }

    if (source.source_path().empty())
        throw IoError("workbook has no source archive");
    auto zip = ZipArchive::open(source.source_path());

    ZipWriter writer;
    for (const auto& entry : zip.entries()) {
        auto it = per_part.find(entry.name);
        if (it == per_part.end()) {
            writer.add_raw(entry, zip.raw_data(entry));
            continue;
        }
        writer.add(entry.name, patch_sheet_xml(zip.read(entry), entry.name, it->second), &entry);
    }
    auto bytes = writer.finish();

    auto tmp = out_path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("short write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, out_path, ec);
    if (ec)
        throw IoError("cannot move output into place at '" + out_path.string() + "': " + ec.message());
}

} // namespace sheetagent
