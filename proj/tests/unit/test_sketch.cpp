#include "sheetagent/sketch.hpp"
#include "sketch_gen.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace sheetagent;
using namespace sheetagent::sketch;
using testing::sketch_gen::random_sketch;

namespace {

std::string reference_sketch() { return testing::slurp(testing::fixture("reference/yaml_structure_example.md")); }
std::string reference_verification() { return testing::slurp(testing::fixture("reference/verification_example.txt")); }

Workbook leave() { return load_workbook(testing::fixture("leave.xlsx")); }

bool has_error(const std::vector<Violation>& vs)
{
    return std::any_of(vs.begin(), vs.end(), [](const Violation& v) { return v.severity == Severity::Error; });
}

/// Sketch derived from the leave fixture's cells: row 4 headers over A..K,
/// and one row-header node per run of equal names in column A.
TableSketch sketch_from_leave(const Workbook& wb)
{
    const auto& sheet = wb.sheet("Leave used by employee");
    TableSketch s;
    s.sheet_name = sheet.name();
    s.table_name = "Leave Entries";
    s.table_range = parse_range("A4:K194");
    s.data_range = parse_range("A5:K194");
    s.header_format = HeaderFormat::ColumnOnly;
    for (std::uint32_t c = 1; c <= 11; ++c) {
        HeaderNode n;
        n.name = "node_" + std::to_string(c);
        n.start_index = n.end_index = {c, 4};
        n.value = display_text(get_cell(sheet, n.start_index).value);
        s.column_header.push_back(n);
        s.data_properties.emplace_back(n.value, DataProperty{DataType::String, "", "plain"});
    }
    std::uint32_t run = 5;
    for (std::uint32_t r = 5; r <= 195; ++r) {
        auto here = r <= 194 ? display_text(get_cell(sheet, {1, r}).value) : std::string("\x01");
        auto first = display_text(get_cell(sheet, {1, run}).value);
        if (here == first)
            continue;
        HeaderNode n;
        n.name = "node_" + std::to_string(s.row_header.size() + 1);
        n.start_index = {1, run};
        n.end_index = {1, r - 1};
        n.value = first;
        s.row_header.push_back(n);
        run = r;
    }
    return s;
}

} // namespace

TEST_CASE("extract_yaml_blocks")
{
    CHECK(extract_yaml_blocks("no fences here").empty());
    CHECK(extract_yaml_blocks("").empty());

    auto blocks = extract_yaml_blocks(reference_sketch());
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[0].find("table_name: Leave Entries") != std::string::npos);
    CHECK(blocks[1].find("table_name: Leave Summary Area") != std::string::npos);

    auto one = extract_yaml_blocks("```yaml\na: 1\n```\ntext\n```yaml\nb: 2\n");
    REQUIRE(one.size() == 1);
    CHECK(one[0] == "a: 1\n");

    // Non-yaml fences are skipped without desynchronizing the scanner.
    auto mixed = extract_yaml_blocks("```python\nprint(1)\n```\n```yaml\nx: y\n```\n```\nplain\n```\n");
    REQUIRE(mixed.size() == 1);
    CHECK(mixed[0] == "x: y\n");
}

TEST_CASE("extract_yaml_blocks against a generation oracle")
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::string doc;
        std::vector<std::string> expected;
        int parts = std::uniform_int_distribution<int>(0, 6)(rng);
        for (int i = 0; i < parts; ++i) {
            std::string body = "k" + std::to_string(i) + ": v\nlist:\n  - x\n";
            switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
            case 0: doc += "Some prose, with `code` and ``double``.\n"; break;
            case 1:
                doc += "```yaml\n" + body + "```\n";
                expected.push_back(body);
                break;
            case 2: doc += "```python\nx = '```yaml'\n```\n"; break;
            case 3:
                doc += "```YAML\n" + body + "```\n";
                expected.push_back(body);
                break;
            }
        }
        if (std::uniform_int_distribution<int>(0, 1)(rng))
            doc += "```yaml\nunterminated: true\n";
        CHECK(extract_yaml_blocks(doc) == expected);
    }
}

TEST_CASE("parse the reference structure example")
{
    auto result = parse_sketches(reference_sketch());
    CHECK(result.errors.empty());
    REQUIRE(result.sketches.size() == 2);

    const auto& main = result.sketches[0];
    CHECK(main.sheet_name == "Leave used by employee");
    CHECK(main.table_name == "Leave Entries");
    CHECK(main.table_range == parse_range("A4:U194"));
    CHECK(main.data_range == parse_range("A5:U194"));
    REQUIRE(main.notes.size() == 2);
    CHECK(main.notes[1] == "Note: what is the formula to sum total for each employee under each category?");
    CHECK(main.header_format == HeaderFormat::ColumnOnly);
    REQUIRE(main.row_header.size() == 4);
    CHECK(main.row_header[0].name == "node_1");
    CHECK(main.row_header[0].span() == parse_range("A5:A50"));
    CHECK(main.row_header[0].value == "Employee 1");
    CHECK(main.row_header[3].span() == parse_range("A159:A194"));
    REQUIRE(main.column_header.size() == 3);
    CHECK(main.column_header[2].value == "Date");
    REQUIRE(main.data_properties.size() == 3);
    CHECK(main.data_properties[2].first == "Date");
    CHECK(main.data_properties[2].second == DataProperty{DataType::Date, "", "date-string"});

    const auto& summary = result.sketches[1];
    CHECK(summary.table_range == parse_range("L4:U8"));
    CHECK(summary.header_format == HeaderFormat::Both);
    CHECK(summary.row_header.size() == 4);
    CHECK(summary.column_header[1].value == "LWOP");
    CHECK(summary.data_properties[0].second == DataProperty{DataType::Empty, "hours", "decimal"});
}

TEST_CASE("parse the prompt's own template")
{
    // The extraction prompt's template uses "..." placeholders and list-style children.
    auto prompt = testing::slurp(std::filesystem::path(SHEETAGENT_SOURCE_DIR) / "assets/prompts/extraction.txt");
    auto blocks = extract_yaml_blocks(prompt);
    REQUIRE(blocks.size() == 1);
    // Placeholder ranges are not ranges; swap them for real ones.
    auto yaml = blocks[0];
    yaml.replace(yaml.find("table_range: table_range"), 24, "table_range: A1:D4");
    yaml.replace(yaml.find("data_range: data_range"), 22, "data_range: C3:D4");
    auto s = parse_sketch_document(yaml);
    CHECK(s.notes.empty());
    REQUIRE(s.row_header.size() == 1);
    REQUIRE(s.row_header[0].children.size() == 2);
    CHECK(s.row_header[0].children[1].name == "node_1.2");
    CHECK(s.row_header[0].children[1].value == "Area");
    CHECK(s.row_header[0].children[1].children.empty());
    CHECK(s.column_header[0].span() == parse_range("C1:D1"));
    CHECK(s.data_properties[1].second == DataProperty{DataType::Number, "km", "comma-separated"});
}

TEST_CASE("parse_sketches: minimal, lenient and failing blocks")
{
    auto minimal = parse_sketches("```yaml\nsheet_name: S\ntable_range: B2\ndata_range: B2:B2\n```\n");
    REQUIRE(minimal.sketches.size() == 1);
    const auto& m = minimal.sketches[0];
    CHECK(m.table_range == parse_range("B2:B2"));
    CHECK(m.table_name.empty());
    CHECK(m.notes.empty());
    CHECK_FALSE(m.header_format);
    CHECK(m.row_header.empty());
    CHECK(m.column_header.empty());
    CHECK(m.data_properties.empty());

    auto mixed = parse_sketches("```yaml\nsheet_name: S\ndata_range: A1:A2\n```\n"
                                "```yaml\nsheet_name: T\ntable_range: A1:C3\ndata_range: A2:C3\n```\n");
    REQUIRE(mixed.errors.size() == 1);
    CHECK(mixed.errors[0].block_index() == 0);
    CHECK(mixed.errors[0].field() == "table_range");
    REQUIRE(mixed.sketches.size() == 1);
    CHECK(mixed.sketches[0].sheet_name == "T");

    auto lenient = parse_sketch_document("sheet_name: S\n"
                                         "table_range: \"'S'!$A$1:$C$3\"\n"
                                         "data_range: a2:c3\n"
                                         "header_format: Both row & column headers\n"
                                         "column_header:\n"
                                         "  - start_index: C1\n"
                                         "    end_index: A1\n"
                                         "    value: Top\n"
                                         "data_properties:\n"
                                         "  Top:\n"
                                         "    unit: km\n");
    CHECK(lenient.table_range == parse_range("A1:C3"));
    CHECK(lenient.data_range == parse_range("A2:C3"));
    CHECK(lenient.header_format == HeaderFormat::Both);
    REQUIRE(lenient.column_header.size() == 1);
    CHECK(lenient.column_header[0].name == "node_1");
    CHECK(lenient.column_header[0].span() == parse_range("A1:C1"));
    CHECK(lenient.data_properties[0].second.type == DataType::Mixed);

    CHECK(parse_header_format("column-only header") == HeaderFormat::ColumnOnly);
    CHECK(parse_header_format("Row only") == HeaderFormat::RowOnly);
    CHECK(parse_header_format("both") == HeaderFormat::Both);
    CHECK_FALSE(parse_header_format("diagonal"));
    CHECK(parse_data_type("Numeric") == DataType::Number);
    CHECK(parse_data_type("text") == DataType::String);
    CHECK_FALSE(parse_data_type("vector"));

    auto field_of = [](const std::string& yaml) {
        try {
            parse_sketch_document(yaml);
        } catch (const SchemaError& e) {
            return e.field();
        }
        return std::string("<no error>");
    };
    CHECK(field_of("table_range: A1\ndata_range: A1\n") == "sheet_name");
    CHECK(field_of("sheet_name: S\ntable_range: A0:B2\ndata_range: A1\n") == "table_range");
    CHECK(field_of("sheet_name: S\ntable_range: A1\ndata_range: A1\nheader_format: diagonal\n") == "header_format");
    CHECK(field_of("sheet_name: S\ntable_range: A1\ndata_range: A1\nrow_header:\n  node_1:\n    value: x\n") ==
          "row_header.node_1.start_index");
    CHECK(field_of("sheet_name: S\ntable_range: A1\ndata_range: A1\ndata_properties:\n  X:\n    type: vector\n") ==
          "data_properties.X.type");
    CHECK(field_of("- just\n- a list\n") == "");
    CHECK(field_of("sheet_name: [unclosed\n") == "");
}

TEST_CASE("serialize_sketch")
{
    TableSketch empty;
    empty.sheet_name = "Sheet1";
    empty.table_range = empty.data_range = parse_range("A1");
    auto text = serialize_sketch(empty);
    CHECK(text.find("row_header: {}\n") != std::string::npos);
    CHECK(text.find("column_header: {}\n") != std::string::npos);
    CHECK(text.find("table_name: ''\n") != std::string::npos);
    CHECK(text.find("header_format") == std::string::npos);

    // Top-level key order follows the prompt template.
    auto main = parse_sketches(reference_sketch()).sketches.at(0);
    auto out = serialize_sketch(main);
    std::size_t last = 0;
    for (std::string key : {"sheet_name:", "table_name:", "table_range:", "data_range:", "notes:", "header_format:",
                            "row_header:", "column_header:", "data_properties:"}) {
        auto at = out.find("\n" + key);
        if (key == "sheet_name:")
            at = out.rfind(key, 0);
        REQUIRE_MESSAGE(at != std::string::npos, key);
        CHECK_MESSAGE(at >= last, key);
        last = at;
    }
    CHECK(out.find("    start_index: A5\n    end_index: A50\n    value: Employee 1\n    children: []\n") !=
          std::string::npos);
    CHECK(out.find("    type: date\n    unit: ''\n    format: date-string\n") != std::string::npos);

    auto back = parse_sketches(fence(out));
    REQUIRE(back.sketches.size() == 1);
    CHECK(back.sketches[0] == main);

    TableSketch noted = empty;
    noted.notes = {"Source: survey 2021", "a #comment-like", "- dash first"};
    auto noted_text = serialize_sketch(noted);
    CHECK(noted_text.find("\"Source: survey 2021\"") != std::string::npos);
    CHECK(parse_sketch_document(noted_text) == noted);
}

TEST_CASE("round trip over 500 generated sketches")
{
    std::mt19937 rng(20240611);
    for (int i = 0; i < 500; ++i) {
        auto s = random_sketch(rng);
        auto text = serialize_sketch(s);
        auto parsed = parse_sketches(fence(text));
        REQUIRE_MESSAGE(parsed.errors.empty(), text);
        REQUIRE(parsed.sketches.size() == 1);
        CHECK_MESSAGE(parsed.sketches[0] == s, text);
        CHECK(serialize_sketch(parsed.sketches[0]) == text);
    }

    std::vector<TableSketch> batch;
    for (int i = 0; i < 3; ++i)
        batch.push_back(random_sketch(rng));
    CHECK(parse_sketches(serialize_sketches(batch)).sketches == batch);
}

TEST_CASE("validate_sketch against leave.xlsx")
{
    auto wb = leave();
    auto truth = sketch_from_leave(wb);
    REQUIRE(truth.row_header.size() == 4);
    CHECK(truth.row_header[0].span() == parse_range("A5:A50"));
    CHECK(validate_sketch(truth, wb).empty());

    // The reference example's main table, trimmed to the columns it actually names.
    auto example = parse_sketches(reference_sketch()).sketches.at(0);
    CHECK_FALSE(has_error(validate_sketch(example, wb)));

    auto wrong = example;
    wrong.row_header[0].value = "Employee 9";
    auto vs = validate_sketch(wrong, wb);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].severity == Severity::Error);
    CHECK(vs[0].location == parse_range("A5"));
    CHECK(vs[0].message.find("mismatch") != std::string::npos);
    CHECK(vs[0].message.find("Employee 1") != std::string::npos);

    auto unknown = truth;
    unknown.sheet_name = "Nope";
    vs = validate_sketch(unknown, wb);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].message.find("unknown sheet") != std::string::npos);

    auto bad = truth;
    bad.data_range = parse_range("A5:L194");
    bad.column_header[1].end_index = {3, 4}; // B4:C4 now overlaps C4
    bad.row_header[3].end_index = {1, 200};
    bad.data_properties.emplace_back("Nowhere", DataProperty{});
    vs = validate_sketch(bad, wb);
    auto count = [&](const std::string& needle, Severity sev) {
        return std::count_if(vs.begin(), vs.end(), [&](const Violation& v) {
            return v.severity == sev && v.message.find(needle) != std::string::npos;
        });
    };
    CHECK(count("data_range A5:L194 is not inside", Severity::Error) == 1);
    CHECK(count("overlaps sibling node_2", Severity::Error) == 1);
    CHECK(count("outside table_range", Severity::Error) == 1);
    CHECK(count("Nowhere", Severity::Warning) == 1);
    for (const auto& v : vs)
        CHECK_FALSE(v.message.empty());
}

TEST_CASE("validate_sketch flags a table_range past the data")
{
    // Same sheet name and header row, but data stops at row 120.
    auto src = leave();
    const auto& full = src.sheet("Leave used by employee");
    Sheet cut(full.name(), std::make_shared<std::vector<CellStyle>>(full.styles()));
    for (const auto& [ref, entry] : full.cells())
        if (ref.row <= 120)
            cut.set_cell(ref, entry.value, entry.style_id);
    Workbook wb("cut.xlsx", {cut});

    auto example = parse_sketches(reference_sketch()).sketches.at(0);
    auto vs = validate_sketch(example, wb);
    auto hit = std::find_if(vs.begin(), vs.end(), [](const Violation& v) {
        return v.message.find("the actual data ends before row 194") != std::string::npos;
    });
    REQUIRE(hit != vs.end());
    CHECK(hit->location == parse_range("A4:U194"));
}

TEST_CASE("validate_sketch uses the merge anchor")
{
    auto wb = load_workbook(testing::fixture("styles.xlsx"));
    TableSketch s;
    s.sheet_name = "Headers";
    s.table_range = parse_range("B1:C2");
    s.data_range = parse_range("B2:C2");
    HeaderNode country{"node_1", parse_a1("C1"), parse_a1("C1"), "Country", {}};
    country.children = {{"node_1.1", parse_a1("B2"), parse_a1("B2"), "State", {}},
                        {"node_1.2", parse_a1("C2"), parse_a1("C2"), " City\n", {}}};
    s.column_header = {country};
    s.data_properties = {{"State", {}}, {"City", {}}};
    CHECK(validate_sketch(s, wb).empty());
}

TEST_CASE("parse_verification")
{
    auto report = parse_verification(reference_verification());
    CHECK_FALSE(report.passed);
    REQUIRE(report.issues.size() == 5);
    CHECK(report.issues[0].find("A4:U194") != std::string::npos);
    CHECK(report.issues[0].find("the actual data ends before row 194") != std::string::npos);

    report = parse_verification("verification: true\nissues: []");
    CHECK(report.passed);
    CHECK(report.issues.empty());

    report = parse_verification("I think it looks fine.");
    CHECK_FALSE(report.passed);
    CHECK(report.issues == std::vector<std::string>{std::string(kUnparseableVerification)});

    // The prompt's template shape: trailing commas after the verdict and items.
    report = parse_verification("Checked.\n```yaml\nverification: false,\nissues:\n    - \"Range is off\",\n"
                                "    - \"Header: wrong\"\n```\n");
    CHECK_FALSE(report.passed);
    CHECK(report.issues == std::vector<std::string>{"Range is off", "Header: wrong"});

    // A true verdict with issues is not a pass.
    report = parse_verification("```yaml\nverification: true\nissues:\n  - minor thing\n```");
    CHECK_FALSE(report.passed);
    CHECK(report.issues == std::vector<std::string>{"minor thing"});

    // The last block wins; a preceding echo of the prompt does not.
    report = parse_verification("```yaml\nverification: false\nissues: [x]\n```\nfixed:\n```yaml\nverification: "
                                "True\nissues:\n```");
    CHECK(report.passed);

    // Unquoted colons and trailing prose fall back to line parsing.
    report = parse_verification("**Verification**: false\nissues:\n- Cell A5: says Employee 9\n- B4 missing\n\n"
                                "Overall: please fix.");
    CHECK_FALSE(report.passed);
    CHECK(report.issues == std::vector<std::string>{"Cell A5: says Employee 9", "B4 missing"});

    report = parse_verification("verification: false\nissues: []\n");
    CHECK_FALSE(report.passed);
    CHECK(report.issues.size() == 1);

    report = parse_verification("verification: true/false,\nissues: []");
    CHECK(report.issues == std::vector<std::string>{std::string(kUnparseableVerification)});
}

TEST_CASE("parse_verification is total over random input")
{
    static const std::vector<std::string> atoms = {
        "verification", ":", " ", "true", "false", "\n", "issues", "-", "```", "yaml", "[", "]", "{", "}", "\"",
        "'", ",", "*", "#", "!", "&a", "*a", "|", ">", "\t", std::string(1, '\0'), "\xFF", "\xE2\x80\xA6", "%YAML 1.2", "---",
        "...", "? ", "!!binary", "\\",
    };
    std::mt19937 rng(99);
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        int n = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int k = 0; k < n; ++k) {
            if (std::uniform_int_distribution<int>(0, 3)(rng) == 0)
                s.push_back(char(std::uniform_int_distribution<int>(0, 255)(rng)));
            else
                s += atoms[std::uniform_int_distribution<std::size_t>(0, atoms.size() - 1)(rng)];
        }
        VerificationReport r;
        CHECK_NOTHROW(r = parse_verification(s));
        if (r.passed)
            CHECK(r.issues.empty());
        else
            CHECK_FALSE(r.issues.empty());
    }
    // Deep nesting is refused before yaml-cpp recurses on it.
    CHECK_FALSE(parse_verification("verification: " + std::string(100000, '[')).passed);
}
