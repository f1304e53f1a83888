#include "sheetagent/sketch.hpp"
#include "text.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>

namespace sheetagent::sketch {
namespace {

using detail::lower;
using detail::trim;

bool is_node_field(std::string_view key)
{
    return key == "start_index" || key == "end_index" || key == "value" || key == "children";
}

/// Lowercase, with runs of anything but letters/digits/& folded to one '-'.
std::string fold_token(std::string_view text)
{
    std::string out;
    for (char c : lower(trim(text))) {
        bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '&';
        if (word)
            out.push_back(c);
        else if (!out.empty() && out.back() != '-')
            out.push_back('-');
    }
    while (!out.empty() && out.back() == '-')
        out.pop_back();
    return out;
}

class Parser
{
public:
    explicit Parser(std::size_t block) : block_(block) {}

    TableSketch parse(std::string_view yaml)
    {
        YAML::Node root;
        try {
            root = YAML::Load(preprocess(yaml));
        } catch (const YAML::Exception& e) {
            fail("", "invalid YAML: " + e.msg);
        }
        if (!root.IsMap())
            fail("", "document is not a mapping");

        TableSketch s;
        s.sheet_name = required_string(root, "sheet_name");
        s.table_range = range_field(root, "table_range");
        s.data_range = range_field(root, "data_range");
        s.table_name = optional_string(root["table_name"], "table_name");
        s.notes = notes(root["notes"]);
        if (auto hf = root["header_format"]; hf && !hf.IsNull()) {
            auto text = optional_string(hf, "header_format");
            s.header_format = parse_header_format(text);
            if (!s.header_format)
                fail("header_format", "unknown header format '" + text + "'");
        }
        s.row_header = nodes(root["row_header"], "row_header", "node_");
        s.column_header = nodes(root["column_header"], "column_header", "node_");
        s.data_properties = data_properties(root["data_properties"]);
        return s;
    }

private:
    [[noreturn]] void fail(const std::string& field, const std::string& detail) const
    {
        throw SchemaError(block_, field, detail);
    }

    /// Drops placeholder "..." lines and expands leading tabs, both common in model output.
    static std::string preprocess(std::string_view yaml)
    {
        std::string out;
        for (auto line : detail::split_lines(yaml)) {
            if (detail::is_ellipsis(line))
                continue;
            std::size_t i = 0;
            for (; i < line.size() && (line[i] == ' ' || line[i] == '\t'); ++i)
                out.append(line[i] == '\t' ? 4 : 1, ' ');
            out.append(line.substr(i)).push_back('\n');
        }
        return out;
    }

    static bool plain_ellipsis(const YAML::Node& n)
    {
        return n.IsScalar() && n.Tag() != "!" && detail::is_ellipsis(n.Scalar());
    }

    std::string optional_string(const YAML::Node& n, const std::string& field) const
    {
        if (!n || n.IsNull())
            return {};
        if (!n.IsScalar())
            fail(field, "expected a string");
        return n.Scalar();
    }

    std::string required_string(const YAML::Node& root, const std::string& key) const
    {
        auto n = root[key];
        if (!n || n.IsNull())
            fail(key, "missing required key");
        return optional_string(n, key);
    }

    static std::string clean_ref(std::string_view text)
    {
        text = trim(text);
        if (auto bang = text.rfind('!'); bang != std::string_view::npos)
            text = text.substr(bang + 1);
        std::string out;
        for (char c : text)
            if (c != '$' && !detail::is_space(c))
                out.push_back(c);
        return out;
    }

    RangeRef range_field(const YAML::Node& root, const std::string& key) const
    {
        auto text = required_string(root, key);
        auto r = try_parse_range(clean_ref(text));
        if (!r)
            fail(key, "unparsable range '" + text + "'");
        return *r;
    }

    CellRef cell_field(const YAML::Node& node, const std::string& field) const
    {
        auto text = optional_string(node, field);
        auto c = try_parse_a1(clean_ref(text));
        if (!c)
            fail(field, "unparsable cell reference '" + text + "'");
        return *c;
    }

    std::string flatten(const YAML::Node& n) const
    {
        if (n.IsScalar())
            return n.Scalar();
        if (n.IsMap() && n.size() == 1) {
            auto it = n.begin();
            return it->first.Scalar() + ": " + flatten(it->second);
        }
        return YAML::Dump(n);
    }

    std::vector<std::string> notes(const YAML::Node& n) const
    {
        std::vector<std::string> out;
        if (!n || n.IsNull() || plain_ellipsis(n))
            return out;
        if (n.IsScalar()) {
            if (!trim(n.Scalar()).empty())
                out.push_back(n.Scalar());
            return out;
        }
        if (!n.IsSequence())
            fail("notes", "expected a list of strings");
        for (const auto& item : n) {
            if (item.IsNull() || plain_ellipsis(item))
                continue;
            out.push_back(flatten(item));
        }
        return out;
    }

    HeaderNode node(const YAML::Node& n, std::string name, const std::string& field) const
    {
        if (!n.IsMap())
            fail(field, "header node must be a mapping");
        HeaderNode h;
        h.name = std::move(name);
        if (!n["start_index"] || n["start_index"].IsNull())
            fail(field + ".start_index", "missing required key");
        auto start = cell_field(n["start_index"], field + ".start_index");
        auto end = start;
        if (auto e = n["end_index"]; e && !e.IsNull())
            end = cell_field(e, field + ".end_index");
        auto span = RangeRef::normalize(start, end);
        h.start_index = span.start;
        h.end_index = span.end;
        h.value = optional_string(n["value"], field + ".value");
        h.children = nodes(n["children"], field + ".children", h.name + ".");
        return h;
    }

    std::vector<HeaderNode> nodes(const YAML::Node& n, const std::string& field, const std::string& prefix) const
    {
        std::vector<HeaderNode> out;
        if (!n || n.IsNull() || plain_ellipsis(n))
            return out;
        auto auto_name = [&] { return prefix + std::to_string(out.size() + 1); };
        if (n.IsMap()) {
            for (const auto& kv : n) {
                auto key = kv.first.Scalar();
                out.push_back(node(kv.second, key, field + "." + key));
            }
            return out;
        }
        if (!n.IsSequence())
            fail(field, "expected a mapping or list of header nodes");
        for (const auto& item : n) {
            if (item.IsNull() || plain_ellipsis(item))
                continue;
            if (item.IsMap() && item.size() == 1 && !is_node_field(item.begin()->first.Scalar())) {
                auto key = item.begin()->first.Scalar();
                out.push_back(node(item.begin()->second, key, field + "." + key));
            } else if (item.IsMap()) {
                auto name = auto_name();
                out.push_back(node(item, name, field + "." + name));
            } else {
                fail(field, "unexpected list item");
            }
        }
        return out;
    }

    DataProperty property(const YAML::Node& n, const std::string& field) const
    {
        DataProperty p;
        if (!n || n.IsNull())
            return p;
        auto set_type = [&](const YAML::Node& t) {
            if (!t || t.IsNull())
                return;
            auto text = optional_string(t, field + ".type");
            auto dt = parse_data_type(text);
            if (!dt)
                fail(field + ".type", "unknown data type '" + text + "'");
            p.type = *dt;
        };
        if (n.IsScalar()) {
            set_type(n);
            return p;
        }
        if (!n.IsMap())
            fail(field, "expected a mapping");
        set_type(n["type"]);
        p.unit = optional_string(n["unit"], field + ".unit");
        p.format = optional_string(n["format"], field + ".format");
        return p;
    }

    std::vector<std::pair<std::string, DataProperty>> data_properties(const YAML::Node& n) const
    {
        std::vector<std::pair<std::string, DataProperty>> out;
        if (!n || n.IsNull() || plain_ellipsis(n))
            return out;
        auto add = [&](const YAML::Node& k, const YAML::Node& v) {
            auto key = k.Scalar();
            out.emplace_back(key, property(v, "data_properties." + key));
        };
        if (n.IsMap()) {
            for (const auto& kv : n)
                add(kv.first, kv.second);
        } else if (n.IsSequence()) {
            for (const auto& item : n) {
                if (item.IsNull() || plain_ellipsis(item))
                    continue;
                if (!item.IsMap() || item.size() != 1)
                    fail("data_properties", "expected single-key list items");
                add(item.begin()->first, item.begin()->second);
            }
        } else {
            fail("data_properties", "expected a mapping");
        }
        return out;
    }

    std::size_t block_;
};

// ---- serialization

bool reserved_word(std::string_view s)
{
    static constexpr std::string_view words[] = {"true", "false", "yes", "no",   "on", "off",
                                                 "null", "y",     "n",   "~",    "..."};
    auto l = lower(s);
    for (auto w : words)
        if (l == w)
            return true;
    return false;
}

bool plain_safe(std::string_view s)
{
    if (s.empty() || reserved_word(s))
        return false;
    auto alnum = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'); };
    if (!alnum(s.front()) && s.front() != '_' && s.front() != '(')
        return false;
    if (s.back() == ' ')
        return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (alnum(c))
            continue;
        if (c == ':') {
            if (i + 1 < s.size() && alnum(s[i + 1]))
                continue;
            return false;
        }
        if (std::string_view(" _-.,/()%&+=").find(c) == std::string_view::npos)
            return false;
    }
    return true;
}

std::string scalar(std::string_view s)
{
    if (s.empty())
        return "''";
    if (plain_safe(s))
        return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20 || c == 0x7F) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\x%02X", static_cast<unsigned char>(c));
                out += buf;
            } else {
                out.push_back(c);
            }
        }
    }
    out.push_back('"');
    return out;
}

void emit_node(std::string& out, const HeaderNode& n, int indent)
{
    const std::string pad(std::size_t(indent), ' ');
    out += pad + "start_index: " + format_a1(n.start_index) + "\n";
    out += pad + "end_index: " + format_a1(n.end_index) + "\n";
    out += pad + "value: " + scalar(n.value) + "\n";
    if (n.children.empty()) {
        out += pad + "children: []\n";
        return;
    }
    out += pad + "children:\n";
    for (const auto& c : n.children) {
        out += pad + "  - " + scalar(c.name) + ":\n";
        emit_node(out, c, indent + 6);
    }
}

void emit_header(std::string& out, const char* key, const std::vector<HeaderNode>& roots)
{
    if (roots.empty()) {
        out += std::string(key) + ": {}\n";
        return;
    }
    out += std::string(key) + ":\n";
    for (const auto& n : roots) {
        out += "  " + scalar(n.name) + ":\n";
        emit_node(out, n, 4);
    }
}

} // namespace

SchemaError::SchemaError(std::size_t block_index, std::string field, std::string detail)
    : Error("yaml block " + std::to_string(block_index) + (field.empty() ? "" : ", field '" + field + "'") + ": " +
            detail),
      block_(block_index), field_(std::move(field)), detail_(std::move(detail))
{}

std::string_view to_string(DataType t)
{
    switch (t) {
    case DataType::String: return "string";
    case DataType::Number: return "number";
    case DataType::Date: return "date";
    case DataType::Boolean: return "boolean";
    case DataType::Mixed: return "mixed";
    case DataType::Empty: return "empty";
    }
    return "mixed";
}

std::optional<DataType> parse_data_type(std::string_view text)
{
    auto t = fold_token(text);
    if (t == "string" || t == "text" || t == "str" || t == "categorical")
        return DataType::String;
    if (t == "number" || t == "numeric" || t == "integer" || t == "int" || t == "float" || t == "decimal" ||
        t == "currency" || t == "percentage" || t == "percent")
        return DataType::Number;
    if (t == "date" || t == "datetime" || t == "time" || t == "date-string" || t == "timestamp")
        return DataType::Date;
    if (t == "boolean" || t == "bool")
        return DataType::Boolean;
    if (t == "mixed")
        return DataType::Mixed;
    if (t == "empty" || t == "none" || t == "null" || t == "blank")
        return DataType::Empty;
    return std::nullopt;
}

std::string_view to_string(HeaderFormat f)
{
    switch (f) {
    case HeaderFormat::ColumnOnly: return "column-only";
    case HeaderFormat::RowOnly: return "row-only";
    case HeaderFormat::Both: return "both-row-and-column";
    }
    return "column-only";
}

std::optional<HeaderFormat> parse_header_format(std::string_view text)
{
    auto t = fold_token(text);
    for (std::string_view suffix : {"-headers", "-header"})
        if (t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
            t.resize(t.size() - suffix.size());
            break;
        }
    if (t == "column-only" || t == "column" || t == "columns" || t == "col-only" || t == "columns-only")
        return HeaderFormat::ColumnOnly;
    if (t == "row-only" || t == "row" || t == "rows" || t == "rows-only")
        return HeaderFormat::RowOnly;
    if (t == "both" || t == "both-row-and-column" || t == "both-row-&-column" || t == "row-and-column" ||
        t == "both-row-column" || t == "matrix" || t == "both-rows-and-columns")
        return HeaderFormat::Both;
    return std::nullopt;
}

TableSketch parse_sketch_document(std::string_view yaml) { return Parser(0).parse(yaml); }

ParseResult parse_sketches(std::string_view text)
{
    ParseResult result;
    auto blocks = extract_yaml_blocks(text);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        try {
            result.sketches.push_back(Parser(i).parse(blocks[i]));
        } catch (const SchemaError& e) {
            result.errors.push_back(e);
        }
    }
    return result;
}

std::string serialize_sketch(const TableSketch& s)
{
    std::string out;
    out += "sheet_name: " + scalar(s.sheet_name) + "\n";
    out += "table_name: " + scalar(s.table_name) + "\n";
    out += "table_range: " + format_range(s.table_range) + "\n";
    out += "data_range: " + format_range(s.data_range) + "\n";
    if (s.notes.empty()) {
        out += "notes: []\n";
    } else {
        out += "notes:\n";
        for (const auto& n : s.notes)
            out += "  - " + scalar(n) + "\n";
    }
    if (s.header_format)
        out += "header_format: " + std::string(to_string(*s.header_format)) + "\n";
    emit_header(out, "row_header", s.row_header);
    emit_header(out, "column_header", s.column_header);
    if (s.data_properties.empty()) {
        out += "data_properties: {}\n";
    } else {
        out += "data_properties:\n";
        for (const auto& [key, p] : s.data_properties) {
            out += "  " + scalar(key) + ":\n";
            out += "    type: " + std::string(to_string(p.type)) + "\n";
            out += "    unit: " + scalar(p.unit) + "\n";
            out += "    format: " + scalar(p.format) + "\n";
        }
    }
    return out;
}

std::string serialize_sketches(const std::vector<TableSketch>& sketches)
{
    std::string out;
    for (std::size_t i = 0; i < sketches.size(); ++i) {
        if (i)
            out += "\n";
        out += fence(serialize_sketch(sketches[i]));
    }
    return out;
}

} // namespace sheetagent::sketch
