#pragma once

#include "sheetagent/convert.hpp"
#include "sheetagent/llm.hpp"

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sheetagent::tools {

inline constexpr std::string_view kExecutePython = "execute_python";
inline constexpr std::string_view kVisionQA = "vision_question_answer";
inline constexpr std::string_view kLatexQA = "latex_question_answer";
inline constexpr std::string_view kExcelToImage = "convert_excel_to_image";
inline constexpr std::string_view kExcelToLatex = "convert_excel_to_latex";

struct ToolResult
{
    std::string tool_call_id;
    std::vector<llm::Part> parts; // never empty
    bool is_error = false;

    llm::ChatMessage to_message() const;
};

/// The five tool definitions, in registry order.
const std::vector<llm::ToolSpec>& all_tool_specs();
/// Throws std::out_of_range for an unknown name.
const llm::ToolSpec& tool_spec(std::string_view name);

/// Maps the tool-visible mount (default "/mnt/data") onto a host directory.
struct PathMap
{
    std::filesystem::path host_root;
    std::string virtual_root = "/mnt/data";

    std::filesystem::path to_host(const std::string& path) const;
    /// Virtual spelling of a host path under host_root; the host path otherwise.
    std::string to_virtual(const std::filesystem::path& host) const;
};

struct SessionOptions
{
    std::string python = "python3"; // executable, looked up on PATH
    std::filesystem::path sandbox_root;
    std::string virtual_root = "/mnt/data";
    std::chrono::milliseconds timeout{60000};
};

/// One persistent guest interpreter. State survives between execute() calls
/// until a timeout or crash restarts it. Single consumer.
class CodeSession
{
public:
    explicit CodeSession(SessionOptions options);
    ~CodeSession();
    CodeSession(const CodeSession&) = delete;
    CodeSession& operator=(const CodeSession&) = delete;

    ToolResult execute(const std::string& code, const std::string& call_id = "");

    const std::string& id() const { return id_; }
    PathMap paths() const { return {options_.sandbox_root, options_.virtual_root}; }
    const SessionOptions& options() const { return options_; }

private:
    void spawn();
    void stop();

    SessionOptions options_;
    std::string id_;
    int pid_ = -1;
    int fd_ = -1;
    std::string pending_;
    std::mutex mu_;
};

/// What dispatch needs beyond the call itself. Missing pieces turn the
/// corresponding tools into is_error results.
struct ToolEnv
{
    CodeSession* session = nullptr;
    llm::Backend* vision = nullptr; // vision-model role
    llm::Backend* text = nullptr;   // text-model role, answers LaTeX questions
    llm::DecodingParams decoding;
    convert::RenderOptions render;
    std::optional<PathMap> paths; // falls back to the session's mapping
};

class Registry
{
public:
    /// Throws std::invalid_argument for unknown or repeated names.
    explicit Registry(const std::vector<std::string_view>& names);
    static Registry all();

    const std::vector<llm::ToolSpec>& specs() const { return specs_; }
    bool contains(std::string_view name) const;

    /// Never throws: unknown tools, bad arguments and tool failures are is_error results.
    ToolResult dispatch(const llm::ToolCall& call, ToolEnv& env) const noexcept;

private:
    std::vector<llm::ToolSpec> specs_;
};

/// Checks arguments against a spec's parameter schema (object, required, string types).
/// Returns a diagnostic, or nullopt when valid.
std::optional<std::string> check_arguments(const llm::ToolSpec& spec, const llm::Json& arguments);

} // namespace sheetagent::tools
