#pragma once

#include "sheetagent/cell_ref.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sheetagent {

struct Empty
{
    friend bool operator==(const Empty&, const Empty&) = default;
};

struct Text
{
    std::string value;
    friend bool operator==(const Text&, const Text&) = default;
};

struct Number
{
    double value = 0.0;
    friend bool operator==(const Number&, const Number&) = default;
};

struct Boolean
{
    bool value = false;
    friend bool operator==(const Boolean&, const Boolean&) = default;
};

/// ISO-8601, either "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS".
struct DateTime
{
    std::string iso;
    friend bool operator==(const DateTime&, const DateTime&) = default;
};

struct ErrorCode
{
    std::string code;
    friend bool operator==(const ErrorCode&, const ErrorCode&) = default;
};

using CellValue = std::variant<Empty, Text, Number, Boolean, DateTime, ErrorCode>;

inline bool is_empty(const CellValue& v) { return std::holds_alternative<Empty>(v); }

/// Human-readable rendering used by prompts, converters and validators.
std::string display_text(const CellValue& v);

/// Short type tag: "empty", "string", "number", "boolean", "date", "error".
std::string_view type_name(const CellValue& v);

enum Border : std::uint8_t {
    kBorderNone = 0,
    kBorderTop = 1,
    kBorderBottom = 2,
    kBorderLeft = 4,
    kBorderRight = 8,
};

struct CellStyle
{
    std::optional<std::string> fill_color; // "RRGGBB", uppercase
    std::optional<std::string> font_color;
    bool bold = false;
    bool italic = false;
    std::uint8_t borders = kBorderNone;
    std::string number_format = "General";

    friend bool operator==(const CellStyle&, const CellStyle&) = default;
};

struct CellEntry
{
    CellValue value;
    std::uint32_t style_id = 0;
    std::optional<std::string> formula; // kept verbatim, never evaluated
};

class Sheet
{
public:
    Sheet() = default;
    Sheet(std::string name, std::shared_ptr<const std::vector<CellStyle>> styles);

    const std::string& name() const { return name_; }
    const std::map<CellRef, CellEntry>& cells() const { return cells_; }
    const std::vector<RangeRef>& merged() const { return merged_; }
    const std::vector<CellStyle>& styles() const { return *styles_; }

    /// Archive path of the worksheet part this sheet was read from, e.g.
    /// "xl/worksheets/sheet1.xml". Empty for sheets built in memory.
    const std::string& part_name() const { return part_name_; }

    const CellStyle& style(std::uint32_t style_id) const;
    const CellStyle& default_style() const;

    // Builders, used by the reader and by tests constructing sheets by hand.
    void set_cell(CellRef ref, CellValue value, std::uint32_t style_id = 0,
                  std::optional<std::string> formula = std::nullopt);
    void add_merge(const RangeRef& range);
    void set_part_name(std::string part) { part_name_ = std::move(part); }

private:
    std::string name_;
    std::shared_ptr<const std::vector<CellStyle>> styles_;
    std::map<CellRef, CellEntry> cells_;
    std::vector<RangeRef> merged_;
    std::string part_name_;
};

/// Value plus resolved style; Empty and the default style for unpopulated cells.
struct CellView
{
    CellValue value;
    CellStyle style;
};

CellView get_cell(const Sheet& sheet, CellRef ref);

/// Bounding box of cells with a value or a style different from the default.
std::optional<RangeRef> used_range(const Sheet& sheet);

std::optional<RangeRef> merged_region_at(const Sheet& sheet, CellRef ref);

class Workbook
{
public:
    Workbook() = default;
    Workbook(std::filesystem::path source, std::vector<Sheet> sheets);

    const std::filesystem::path& source_path() const { return source_; }
    const std::vector<Sheet>& sheets() const { return sheets_; }

    const Sheet* find_sheet(std::string_view name) const;
    /// Throws UnknownSheet.
    const Sheet& sheet(std::string_view name) const;

private:
    std::filesystem::path source_;
    std::vector<Sheet> sheets_;
};

/// Reads an .xlsx file. Throws NotAZip, MissingPart, MalformedXml, IoError.
Workbook load_workbook(const std::filesystem::path& path);

using CellEdits = std::map<std::pair<std::string, CellRef>, CellValue>;

/// Copies the source archive to out_path, rewriting only the worksheet parts
/// that carry edits. Throws UnknownSheet, IoError.
void write_patched_workbook(const Workbook& source, const CellEdits& edits, const std::filesystem::path& out_path);

/// Serial day number (1900 date system) to ISO-8601.
std::string excel_serial_to_iso(double serial, bool date1904 = false);
/// Inverse of excel_serial_to_iso; nullopt when the string is not ISO-8601.
std::optional<double> iso_to_excel_serial(std::string_view iso);

bool is_date_format(std::uint32_t num_fmt_id, std::string_view format_code);

} // namespace sheetagent
