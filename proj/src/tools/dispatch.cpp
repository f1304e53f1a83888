#include "sheetagent/assets.hpp"
#include "sheetagent/tools.hpp"

#include <algorithm>
#include <set>

namespace sheetagent::tools {
namespace {

using llm::Json;

struct ToolFailure : Error
{
    using Error::Error;
};

ToolResult text_result(const std::string& id, std::string text, bool is_error = false)
{
    return {id, {llm::TextPart{std::move(text)}}, is_error};
}

std::string arg(const Json& args, const char* key)
{
    auto it = args.find(key);
    return it == args.end() || !it->is_string() ? std::string() : it->get<std::string>();
}

std::filesystem::path resolve(const std::string& path, const ToolEnv& env)
{
    if (path.empty())
        throw ToolFailure("path is empty");
    std::optional<PathMap> map = env.paths;
    if (!map && env.session)
        map = env.session->paths();
    if (!map)
        return path;
    auto host = map->to_host(path);
    // The guest's working directory is the sandbox root.
    return host.is_relative() ? map->host_root / host : host;
}

struct Target
{
    Workbook wb;
    const Sheet* sheet = nullptr;
    RangeRef range;
};

// `'Sheet 1'!$A$1:$D$20` and plain `A1:D20` both name a range; an empty string means the used range.
Target open_target(const Json& args, const ToolEnv& env)
{
    Target t;
    t.wb = load_workbook(resolve(arg(args, "path"), env));
    t.sheet = &t.wb.sheet(arg(args, "sheet_name"));
    std::string text = arg(args, "range");
    if (auto bang = text.rfind('!'); bang != std::string::npos)
        text.erase(0, bang + 1);
    std::erase_if(text, [](char c) { return c == '$' || c == ' '; });
    if (text.empty()) {
        auto used = used_range(*t.sheet);
        if (!used)
            throw ToolFailure("sheet '" + t.sheet->name() + "' is empty; there is nothing to show");
        t.range = *used;
    } else {
        t.range = parse_range(text);
    }
    return t;
}

std::string describe(const Target& t)
{
    return "'" + t.sheet->name() + "'!" + format_range(t.range);
}

ToolResult image_tool(const llm::ToolCall& call, const ToolEnv& env)
{
    auto t = open_target(call.arguments, env);
    auto img = convert::range_to_image(*t.sheet, t.range, env.render);
    return {call.id,
            {llm::TextPart{"Image of " + describe(t) + " (" + std::to_string(img.width_px) + "x" +
                           std::to_string(img.height_px) + " px)"},
             llm::ImagePart{std::move(img.png), "image/png"}},
            false};
}

ToolResult latex_tool(const llm::ToolCall& call, const ToolEnv& env)
{
    auto t = open_target(call.arguments, env);
    return text_result(call.id, convert::range_to_latex(*t.sheet, t.range));
}

std::string ask(llm::Backend& backend, llm::ChatMessage prompt, const ToolEnv& env, const char* role)
{
    prompt = llm::truncate_to_budget(prompt, env.decoding.max_tokens_per_round);
    llm::ChatMessage reply;
    try {
        reply = backend.complete({std::move(prompt)}, {}, env.decoding);
    } catch (const std::exception& e) {
        throw ToolFailure(std::string(role) + " model call failed: " + e.what());
    }
    auto text = reply.text();
    if (text.empty())
        throw ToolFailure(std::string(role) + " model returned no answer");
    return text;
}

std::map<std::string, std::string, std::less<>> slots(const llm::ToolCall& call, const Target& t)
{
    return {{"spreadsheet_path", arg(call.arguments, "path")},
            {"sheet_name", t.sheet->name()},
            {"range", format_range(t.range)},
            {"question", arg(call.arguments, "question")}};
}

ToolResult vision_qa(const llm::ToolCall& call, const ToolEnv& env)
{
    if (!env.vision)
        throw ToolFailure("no vision model is configured");
    auto t = open_target(call.arguments, env);
    auto img = convert::range_to_image(*t.sheet, t.range, env.render);
    auto prompt = llm::ChatMessage::user(fill_template(asset("prompts/vision_qa.txt"), slots(call, t)));
    prompt.parts.push_back(llm::ImagePart{std::move(img.png), "image/png"});
    return text_result(call.id, ask(*env.vision, std::move(prompt), env, "vision"));
}

ToolResult latex_qa(const llm::ToolCall& call, const ToolEnv& env)
{
    if (!env.text)
        throw ToolFailure("no text model is configured");
    auto t = open_target(call.arguments, env);
    auto values = slots(call, t);
    values["latex"] = convert::range_to_latex(*t.sheet, t.range);
    auto prompt = llm::ChatMessage::user(fill_template(asset("prompts/latex_qa.txt"), values));
    return text_result(call.id, ask(*env.text, std::move(prompt), env, "text"));
}

ToolResult execute_python(const llm::ToolCall& call, const ToolEnv& env)
{
    if (!env.session)
        throw ToolFailure("no python session is available in this context");
    return env.session->execute(arg(call.arguments, "code"), call.id);
}

std::string joined_names(const std::vector<llm::ToolSpec>& specs)
{
    std::string out;
    for (const auto& s : specs)
        out += (out.empty() ? "" : ", ") + s.name;
    return out;
}

} // namespace

Registry::Registry(const std::vector<std::string_view>& names)
{
    std::set<std::string_view> seen;
    for (auto name : names) {
        if (!seen.insert(name).second)
            throw std::invalid_argument("tool listed twice: " + std::string(name));
        try {
            specs_.push_back(tool_spec(name));
        } catch (const std::out_of_range& e) {
            throw std::invalid_argument(e.what());
        }
    }
}

Registry Registry::all()
{
    return Registry({kExecutePython, kVisionQA, kLatexQA, kExcelToImage, kExcelToLatex});
}

bool Registry::contains(std::string_view name) const
{
    return std::any_of(specs_.begin(), specs_.end(), [&](const auto& s) { return s.name == name; });
}

ToolResult Registry::dispatch(const llm::ToolCall& call, ToolEnv& env) const noexcept
{
    try {
        auto spec = std::find_if(specs_.begin(), specs_.end(), [&](const auto& s) { return s.name == call.name; });
        if (spec == specs_.end())
            return text_result(call.id,
                               "unknown tool '" + call.name + "'; available tools: " + joined_names(specs_), true);
        if (auto problem = check_arguments(*spec, call.arguments))
            return text_result(call.id, *problem, true);

        if (call.name == kExecutePython)
            return execute_python(call, env);
        if (call.name == kVisionQA)
            return vision_qa(call, env);
        if (call.name == kLatexQA)
            return latex_qa(call, env);
        if (call.name == kExcelToImage)
            return image_tool(call, env);
        return latex_tool(call, env);
    } catch (const RangeTooLarge& e) {
        return text_result(call.id, call.name + " failed: " + e.what() + "; request a smaller range", true);
    } catch (const std::exception& e) {
        try {
            return text_result(call.id, call.name + " failed: " + e.what(), true);
        } catch (...) {
        }
    } catch (...) {
    }
    ToolResult r;
    r.tool_call_id = call.id;
    r.is_error = true;
    r.parts.emplace_back(llm::TextPart{});
    return r;
}

} // namespace sheetagent::tools
