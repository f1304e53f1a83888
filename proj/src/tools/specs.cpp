#include "sheetagent/tools.hpp"

#include <stdexcept>

namespace sheetagent::tools {
namespace {

using llm::Json;

Json str(const char* description) { return {{"type", "string"}, {"description", description}}; }

Json object(Json properties, std::vector<std::string> required)
{
    return {{"type", "object"}, {"properties", std::move(properties)}, {"required", std::move(required)}};
}

// Tool contract text is reproduced exactly, including its typography.
constexpr const char* kImageRange =
    "The cell range to search for the image (e.g., 'A1:D20'). Use to limit extraction to a specific area. Images "
    "smaller than 8192×16384 pixels are supported, so keep the range within reasonable bounds.";

std::vector<llm::ToolSpec> build()
{
    std::vector<llm::ToolSpec> specs;
    specs.push_back(
        {"execute_python",
         "When you send a message containing Python code to python, it will be executed in a stateful Jupyter "
         "notebook environment. python will respond with the output of the execution or time out after 60.0 "
         "seconds. The drive at '/mnt/data' can be used to save and persist user files. Internet access for this "
         "session is disabled.",
         object({{"code", str("The Python code to execute")}}, {"code"})});

    specs.push_back(
        {"vision_question_answer",
         "You can analyze a selected range of cells in a spreadsheet using vision capabilities. When asking, focus "
         "on small, well-defined questions and describe all relevant details. Don't just hand over your entire task "
         "to the tool.",
         object({{"path", str("The file path to the spreadsheet containing the image.")},
                 {"sheet_name", str("The name of the sheet from which to extract the image.")},
                 {"range", str((std::string("Optional. ") + kImageRange).c_str())},
                 {"question", str("The question to answer about the specified range of cells.")}},
                {"path", "sheet_name", "range", "question"})});

    specs.push_back(
        {"latex_question_answer",
         "You can analyze a selected range of cells in a spreadsheet using latex capabilities. When asking, focus "
         "on small, well-defined questions and describe all relevant details — don't just hand over your entire "
         "task to the tool.",
         object({{"path", str("The file path to the Excel file.")},
                 {"sheet_name", str("The name of the sheet from which to extract the latex.")},
                 {"range", str("Optional. The cell range to search for the latex (e.g., 'A1:D20'). Use to limit "
                               "extraction to a specific area.")},
                 {"question", str("The question to answer about the specified range of cells.")}},
                {"path", "sheet_name", "range", "question"})});

    specs.push_back({"convert_excel_to_image", "Extracts an image from a specified spreadsheet file.",
                     object({{"path", str("The file path to the Excel file.")},
                             {"sheet_name", str("The name of the sheet from which to extract the image.")},
                             {"range", str(kImageRange)}},
                            {"path", "sheet_name", "range"})});

    specs.push_back({"convert_excel_to_latex", "Converts an Excel file to a LaTeX file.",
                     object({{"path", str("The file path to the Excel file.")},
                             {"sheet_name", str("The name of the sheet from which to extract the image.")},
                             {"range", str("The cell range to convert to LaTeX. Use to limit conversion to a "
                                           "specific area.")}},
                            {"path", "sheet_name", "range"})});
    return specs;
}

} // namespace

const std::vector<llm::ToolSpec>& all_tool_specs()
{
    static const std::vector<llm::ToolSpec> specs = build();
    return specs;
}

const llm::ToolSpec& tool_spec(std::string_view name)
{
    for (const auto& s : all_tool_specs())
        if (s.name == name)
            return s;
    throw std::out_of_range("unknown tool: " + std::string(name));
}

std::optional<std::string> check_arguments(const llm::ToolSpec& spec, const llm::Json& arguments)
{
    if (!arguments.is_object())
        return "arguments for " + spec.name + " must be a JSON object, got " + std::string(arguments.type_name());
    const auto& params = spec.parameters;
    if (auto req = params.find("required"); req != params.end())
        for (const auto& field : *req)
            if (!arguments.contains(field.get<std::string>()))
                return "missing required argument '" + field.get<std::string>() + "' for " + spec.name;
    if (auto props = params.find("properties"); props != params.end())
        for (const auto& [name, schema] : props->items()) {
            auto it = arguments.find(name);
            if (it == arguments.end() || schema.value("type", "") != "string")
                continue;
            if (!it->is_string())
                return "argument '" + name + "' for " + spec.name + " must be a string, got " +
                       std::string(it->type_name());
        }
    return std::nullopt;
}

} // namespace sheetagent::tools
