#pragma once

// Independent reader for the converter's tabular output, used as an oracle.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace testing::latex {

struct ParsedCell
{
    std::uint32_t width = 1;
    std::uint32_t height = 1;
    std::string content;
};

// Splits on top-level, unescaped '&'.
inline std::vector<std::string> split_cells(const std::string& row)
{
    std::vector<std::string> out(1);
    int depth = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        char c = row[i];
        if (c == '\\' && i + 1 < row.size()) {
            out.back() += c;
            out.back() += row[++i];
            continue;
        }
        if (c == '{')
            ++depth;
        if (c == '}')
            --depth;
        if (c == '&' && depth == 0) {
            out.emplace_back();
            continue;
        }
        out.back() += c;
    }
    return out;
}

inline std::string trim(std::string s)
{
    while (!s.empty() && s.front() == ' ')
        s.erase(0, 1);
    while (!s.empty() && s.back() == ' ')
        s.pop_back();
    return s;
}

// Reads "{...}" starting at pos (balanced, escapes respected); returns inner text.
inline std::string group(const std::string& s, std::size_t& pos)
{
    if (pos >= s.size() || s[pos] != '{')
        throw std::runtime_error("expected '{' at offset " + std::to_string(pos));
    int depth = 0;
    std::size_t start = pos + 1;
    for (; pos < s.size(); ++pos) {
        if (s[pos] == '\\') {
            ++pos;
            continue;
        }
        if (s[pos] == '{')
            ++depth;
        if (s[pos] == '}' && --depth == 0)
            return s.substr(start, pos++ - start);
    }
    throw std::runtime_error("unbalanced group");
}

inline ParsedCell parse_cell(std::string text)
{
    ParsedCell cell;
    text = trim(text);
    if (text.starts_with("\\multicolumn")) {
        std::size_t pos = 12;
        cell.width = std::stoul(group(text, pos));
        group(text, pos);
        text = group(text, pos);
    }
    if (text.starts_with("\\multirow")) {
        std::size_t pos = 9;
        cell.height = std::stoul(group(text, pos));
        group(text, pos);
        text = group(text, pos);
    }
    cell.content = trim(text);
    return cell;
}

inline std::vector<std::vector<ParsedCell>> parse_tabular(const std::string& latex)
{
    std::vector<std::vector<ParsedCell>> rows;
    std::size_t pos = 0;
    while (pos < latex.size()) {
        auto nl = latex.find('\n', pos);
        auto line = latex.substr(pos, nl - pos);
        pos = nl == std::string::npos ? latex.size() : nl + 1;
        if (!line.ends_with(" \\\\"))
            continue;
        line.resize(line.size() - 3);
        std::vector<ParsedCell> cells;
        for (const auto& c : split_cells(line))
            cells.push_back(parse_cell(c));
        rows.push_back(std::move(cells));
    }
    return rows;
}

// Oracle: emitted cells plus multirow coverage must tile rows x cols exactly once.
// Returns anchors of emitted content cells keyed by (row, col) offset with their spans.
inline bool tiles_exactly(const std::vector<std::vector<ParsedCell>>& rows, std::uint32_t nrows, std::uint32_t ncols,
                   std::map<std::pair<std::uint32_t, std::uint32_t>, ParsedCell>* anchors = nullptr)
{
    if (rows.size() != nrows)
        return false;
    std::vector<std::vector<int>> count(nrows, std::vector<int>(ncols, 0));
    std::vector<std::vector<int>> owner(nrows, std::vector<int>(ncols, -1)); // multirow id covering the slot
    int next_id = 0;
    for (std::uint32_t r = 0; r < nrows; ++r) {
        std::uint32_t c = 0;
        for (const auto& cell : rows[r]) {
            if (c + cell.width > ncols)
                return false;
            if (r > 0 && owner[r][c] >= 0 && owner[r][c] == owner[r - 1][c] && count[r][c] == 1) {
                // placeholder in a slot already covered by a multirow above
                for (std::uint32_t k = 0; k < cell.width; ++k)
                    if (owner[r][c + k] != owner[r][c])
                        return false;
                if (!cell.content.empty() || cell.height != 1)
                    return false;
                c += cell.width;
                continue;
            }
            int id = next_id++;
            for (std::uint32_t dr = 0; dr < cell.height; ++dr)
                for (std::uint32_t k = 0; k < cell.width; ++k) {
                    if (r + dr >= nrows)
                        return false;
                    ++count[r + dr][c + k];
                    owner[r + dr][c + k] = id;
                }
            if (anchors)
                (*anchors)[{r, c}] = cell;
            c += cell.width;
        }
        if (c != ncols)
            return false;
    }
    for (const auto& row : count)
        for (int n : row)
            if (n != 1)
                return false;
    return true;
}

// Character-wise escape table, written out independently of the converter.
inline std::string oracle_escape(const std::string& s)
{
    static const std::map<char, std::string> table = {
        {'&', "\\&"}, {'%', "\\%"}, {'$', "\\$"}, {'#', "\\#"}, {'_', "\\_"}, {'{', "\\{"}, {'}', "\\}"},
        {'~', "\\textasciitilde{}"}, {'^', "\\textasciicircum{}"}, {'\\', "\\textbackslash{}"}, {'\n', " "},
    };
    std::string out;
    for (char c : s) {
        auto it = table.find(c);
        out += it == table.end() ? std::string(1, c) : it->second;
    }
    return out;
}

// True when no special character appears unescaped.
inline bool escape_clean(const std::string& s)
{
    static const std::string specials = "&%$#_{}~^";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\') {
            std::string_view rest(s.data() + i + 1, s.size() - i - 1);
            if (!rest.empty() && std::string_view("&%$#_{}").find(rest[0]) != std::string_view::npos) {
                ++i;
                continue;
            }
            bool ok = false;
            for (std::string_view cmd : {"textasciitilde{}", "textasciicircum{}", "textbackslash{}"})
                if (rest.starts_with(cmd)) {
                    i += cmd.size();
                    ok = true;
                    break;
                }
            if (!ok)
                return false;
            continue;
        }
        if (specials.find(s[i]) != std::string::npos)
            return false;
    }
    return true;
}

} // namespace testing::latex
