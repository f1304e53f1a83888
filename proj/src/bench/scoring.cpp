#include "sheetagent/bench.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace sheetagent::bench {
namespace {

using llm::Json;

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> as_number(const CellValue& v)
{
    if (const auto* n = std::get_if<Number>(&v))
        return n->value;
    if (const auto* d = std::get_if<DateTime>(&v))
        return iso_to_excel_serial(d->iso);
    if (const auto* t = std::get_if<Text>(&v)) {
        auto s = trim(t->value);
        if (s.empty())
            return std::nullopt;
        char* end = nullptr;
        double x = std::strtod(s.c_str(), &end);
        if (end == s.c_str() + s.size() && std::isfinite(x))
            return x;
    }
    return std::nullopt;
}

bool close(double a, double b)
{
    return std::fabs(a - b) <= 1e-6 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

Category parse_category(const Json& j)
{
    if (j.is_string()) {
        auto s = j.get<std::string>();
        if (s == "cell-level")
            return Category::CellLevel;
        if (s == "sheet-level")
            return Category::SheetLevel;
    }
    throw ManifestError("category", "expected \"cell-level\" or \"sheet-level\", got " + j.dump());
}

CellValue parse_value(const Json& j, const std::string& field)
{
    switch (j.type()) {
    case Json::value_t::null: return Empty{};
    case Json::value_t::boolean: return Boolean{j.get<bool>()};
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
    case Json::value_t::number_float: return Number{j.get<double>()};
    case Json::value_t::string: return Text{j.get<std::string>()};
    default: throw ManifestError(field, "expected a number, string, boolean or null");
    }
}

std::string need_string(const Json& task, const char* key, const std::string& prefix)
{
    auto it = task.find(key);
    if (it == task.end() || !it->is_string() || it->get<std::string>().empty())
        throw ManifestError(prefix + key, "required non-empty string");
    return it->get<std::string>();
}

std::filesystem::path existing(const std::filesystem::path& dir, const std::string& rel)
{
    auto p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : dir / rel;
    if (!std::filesystem::is_regular_file(p))
        throw MissingFile(p);
    return p;
}

using CellKey = std::pair<std::string, CellRef>;

const CellValue& value_or_empty(const Sheet& s, CellRef ref)
{
    static const CellValue empty = Empty{};
    auto it = s.cells().find(ref);
    return it == s.cells().end() ? empty : it->second.value;
}

// Cells the task is allowed to change.
std::set<CellKey> answer_cells(const TaskInstance& task, const Workbook& input)
{
    std::set<CellKey> out;
    for (const auto& a : task.answers)
        out.insert({a.sheet, a.cell});
    if (task.golden_output) {
        auto golden = load_workbook(*task.golden_output);
        for (const auto& gs : golden.sheets()) {
            const Sheet* is = input.find_sheet(gs.name());
            for (const auto& [ref, entry] : gs.cells())
                if (!is || !values_match(entry.value, value_or_empty(*is, ref)))
                    out.insert({gs.name(), ref});
            if (is)
                for (const auto& [ref, entry] : is->cells())
                    if (!values_match(entry.value, value_or_empty(gs, ref)))
                        out.insert({gs.name(), ref});
        }
    }
    return out;
}

} // namespace

std::string_view to_string(Category c) { return c == Category::CellLevel ? "cell-level" : "sheet-level"; }

std::vector<TaskInstance> load_tasks(const std::filesystem::path& dir)
{
    const auto manifest = dir / "manifest.json";
    std::ifstream in(manifest);
    if (!in)
        throw MissingFile(manifest);
    std::stringstream ss;
    ss << in.rdbuf();
    Json root;
    try {
        root = Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw ManifestError("(document)", e.what());
    }
    const Json* list = &root;
    if (root.is_object()) {
        if (!root.contains("tasks"))
            throw ManifestError("tasks", "missing");
        list = &root["tasks"];
    }
    if (!list->is_array())
        throw ManifestError("tasks", "expected an array");

    std::vector<TaskInstance> tasks;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const auto& j = (*list)[i];
        const auto prefix = "tasks[" + std::to_string(i) + "].";
        if (!j.is_object())
            throw ManifestError("tasks[" + std::to_string(i) + "]", "expected an object");
        TaskInstance t;
        t.id = need_string(j, "id", prefix);
        if (t.id.find_first_of("/\\") != std::string::npos || t.id == "." || t.id == "..")
            throw ManifestError(prefix + "id", "must be usable as a file name");
        if (!ids.insert(t.id).second)
            throw ManifestError(prefix + "id", "duplicate id '" + t.id + "'");
        t.instruction = need_string(j, "instruction", prefix);
        t.input_path = existing(dir, need_string(j, "input", prefix));
        if (!j.contains("category"))
            throw ManifestError(prefix + "category", "missing");
        try {
            t.category = parse_category(j["category"]);
        } catch (const ManifestError& e) {
            throw ManifestError(prefix + "category", e.what());
        }

        const bool has_answers = j.contains("answers");
        const bool has_golden = j.contains("golden_output");
        if (has_answers == has_golden)
            throw ManifestError(prefix + "answers", "exactly one of answers and golden_output is required");
        if (has_golden) {
            t.golden_output = existing(dir, need_string(j, "golden_output", prefix));
        } else {
            const auto& answers = j["answers"];
            if (!answers.is_array() || answers.empty())
                throw ManifestError(prefix + "answers", "expected a non-empty array");
            for (std::size_t k = 0; k < answers.size(); ++k) {
                const auto ap = prefix + "answers[" + std::to_string(k) + "].";
                const auto& a = answers[k];
                if (!a.is_object() || !a.contains("value"))
                    throw ManifestError(ap + "value", "missing");
                auto cell = try_parse_a1(need_string(a, "cell", ap));
                if (!cell)
                    throw ManifestError(ap + "cell", "not an A1 reference");
                t.answers.push_back({need_string(a, "sheet", ap), *cell, parse_value(a["value"], ap + "value")});
            }
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

bool values_match(const CellValue& expected, const CellValue& actual)
{
    const bool numeric = std::holds_alternative<Number>(expected) || std::holds_alternative<Number>(actual) ||
                         std::holds_alternative<DateTime>(expected) || std::holds_alternative<DateTime>(actual);
    if (numeric) {
        auto a = as_number(expected);
        auto b = as_number(actual);
        if (a && b)
            return close(*a, *b);
        if (a || b)
            return false;
    }
    return trim(display_text(expected)) == trim(display_text(actual));
}

bool score_soft(const std::filesystem::path& output, const TaskInstance& task)
{
    try {
        auto out = load_workbook(output);
        for (const auto& a : task.answers) {
            const Sheet* s = out.find_sheet(a.sheet);
            if (!s || !values_match(a.expected, get_cell(*s, a.cell).value))
                return false;
        }
        if (task.golden_output) {
            auto golden = load_workbook(*task.golden_output);
            for (const auto& gs : golden.sheets()) {
                const Sheet* s = out.find_sheet(gs.name());
                if (!s)
                    return false;
                for (const auto& [ref, entry] : gs.cells())
                    if (!is_empty(entry.value) && !values_match(entry.value, value_or_empty(*s, ref)))
                        return false;
            }
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

bool score_hard(const std::filesystem::path& output, const TaskInstance& task)
{
    try {
        if (!score_soft(output, task))
            return false;
        auto in = load_workbook(task.input_path);
        auto out = load_workbook(output);
        const auto allowed = answer_cells(task, in);
        for (const auto& is : in.sheets()) {
            const Sheet* os = out.find_sheet(is.name());
            if (!os)
                return false;
            std::set<CellRef> refs;
            for (const auto& [ref, _] : is.cells())
                refs.insert(ref);
            for (const auto& [ref, _] : os->cells())
                refs.insert(ref);
            for (auto ref : refs)
                if (!allowed.count({is.name(), ref}) &&
                    !values_match(value_or_empty(is, ref), value_or_empty(*os, ref)))
                    return false;
            for (const auto& m : is.merged())
                if (std::find(os->merged().begin(), os->merged().end(), m) == os->merged().end())
                    return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

ScoreReport ScoreReport::aggregate(std::vector<TaskResult> tasks)
{
    ScoreReport r;
    for (const auto& t : tasks) {
        for (Rates* rates : {&r.overall, t.category == Category::CellLevel ? &r.cell_level : &r.sheet_level}) {
            ++rates->count;
            rates->soft_passed += t.soft_pass;
            rates->hard_passed += t.hard_pass;
        }
        r.stats.total_agent_calls += t.agent_calls;
    }
    r.tasks = std::move(tasks);
    return r;
}

Json ScoreReport::to_json() const
{
    auto rates = [](const Rates& x) {
        return Json{{"count", x.count},
                    {"soft_passed", x.soft_passed},
                    {"hard_passed", x.hard_passed},
                    {"soft_percent", x.soft_percent()},
                    {"hard_percent", x.hard_percent()}};
    };
    Json list = Json::array();
    for (const auto& t : tasks) {
        Json j{{"id", t.id},
               {"category", to_string(t.category)},
               {"soft_pass", t.soft_pass},
               {"hard_pass", t.hard_pass},
               {"agent_calls", t.agent_calls},
               {"sheets_sketched", t.sheets_sketched},
               {"sheets_verified", t.sheets_verified}};
        if (t.error)
            j["error"] = *t.error;
        list.push_back(std::move(j));
    }
    return {{"tasks", std::move(list)},
            {"aggregates",
             {{"cell_level", rates(cell_level)}, {"sheet_level", rates(sheet_level)}, {"overall", rates(overall)}}},
            {"stats", {{"total_agent_calls", stats.total_agent_calls}}}};
}

} // namespace sheetagent::bench
