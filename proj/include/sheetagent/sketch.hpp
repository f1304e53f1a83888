#pragma once

#include "sheetagent/cell_ref.hpp"
#include "sheetagent/error.hpp"
#include "sheetagent/workbook.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sheetagent::sketch {

struct HeaderNode
{
    std::string name; // "node_1", "node_1.2", ...
    CellRef start_index;
    CellRef end_index;
    std::string value;
    std::vector<HeaderNode> children;

    RangeRef span() const { return {start_index, end_index}; }

    friend bool operator==(const HeaderNode&, const HeaderNode&) = default;
};

enum class DataType { String, Number, Date, Boolean, Mixed, Empty };

std::string_view to_string(DataType t);
/// Folds common synonyms ("text", "numeric", "bool", ...). nullopt if unknown.
std::optional<DataType> parse_data_type(std::string_view text);

struct DataProperty
{
    DataType type = DataType::Mixed;
    std::string unit;
    std::string format;

    friend bool operator==(const DataProperty&, const DataProperty&) = default;
};

enum class HeaderFormat { ColumnOnly, RowOnly, Both };

std::string_view to_string(HeaderFormat f);
/// Accepts "column-only header", "both", "both row & column" and similar.
std::optional<HeaderFormat> parse_header_format(std::string_view text);

struct TableSketch
{
    std::string sheet_name;
    std::string table_name;
    RangeRef table_range;
    RangeRef data_range;
    std::vector<std::string> notes;
    std::optional<HeaderFormat> header_format;
    std::vector<HeaderNode> row_header;
    std::vector<HeaderNode> column_header;
    // Document order is kept, so this is a list rather than a map.
    std::vector<std::pair<std::string, DataProperty>> data_properties;

    friend bool operator==(const TableSketch&, const TableSketch&) = default;
};

class SchemaError : public Error
{
public:
    SchemaError(std::size_t block_index, std::string field, std::string detail);

    std::size_t block_index() const noexcept { return block_; }
    const std::string& field() const noexcept { return field_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t block_;
    std::string field_;
    std::string detail_;
};

struct ParseResult
{
    std::vector<TableSketch> sketches;
    std::vector<SchemaError> errors; // one per rejected block
};

/// Contents of every ```yaml fence, in order. Unterminated fences are dropped.
std::vector<std::string> extract_yaml_blocks(std::string_view text);

/// Wraps a YAML document in a ```yaml fence.
std::string fence(std::string_view yaml);

/// Parses every yaml block in text. Bad blocks land in errors; good ones still parse.
ParseResult parse_sketches(std::string_view text);

/// Parses one YAML document (no fences). Throws SchemaError with block index 0.
TableSketch parse_sketch_document(std::string_view yaml);

std::string serialize_sketch(const TableSketch& s);
/// Serializes several sketches as consecutive fenced blocks.
std::string serialize_sketches(const std::vector<TableSketch>& sketches);

enum class Severity { Error, Warning };

struct Violation
{
    Severity severity = Severity::Error;
    std::optional<RangeRef> location;
    std::string message;
};

std::vector<Violation> validate_sketch(const TableSketch& s, const Workbook& wb);

struct VerificationReport
{
    bool passed = false;
    std::vector<std::string> issues;
};

inline constexpr std::string_view kUnparseableVerification = "unparseable verification output";

/// Total: never throws. Unrecognizable text is a failed report.
VerificationReport parse_verification(std::string_view text);

} // namespace sheetagent::sketch
