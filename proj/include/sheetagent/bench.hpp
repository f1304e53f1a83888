#pragma once

#include "sheetagent/agent.hpp"

#include <chrono>
#include <functional>
#include <memory>

namespace sheetagent::bench {

enum class Category { CellLevel, SheetLevel };
std::string_view to_string(Category c);

struct Answer
{
    std::string sheet;
    CellRef cell;
    CellValue expected;
};

struct TaskInstance
{
    std::string id;
    std::string instruction;
    std::filesystem::path input_path;
    Category category = Category::CellLevel;
    std::vector<Answer> answers;                       // answers mode
    std::optional<std::filesystem::path> golden_output; // golden mode
};

class ManifestError : public Error
{
public:
    ManifestError(std::string field, const std::string& detail)
        : Error("manifest field '" + field + "': " + detail), field_(std::move(field))
    {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class MissingFile : public Error
{
public:
    explicit MissingFile(std::filesystem::path p) : Error("missing file: " + p.string()), path_(std::move(p)) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Reads dir/manifest.json. Relative paths resolve against dir.
std::vector<TaskInstance> load_tasks(const std::filesystem::path& dir);

/// Numbers within 1e-6 relative tolerance (numeric text counts as a number),
/// dates by serial, everything else by trimmed display text.
bool values_match(const CellValue& expected, const CellValue& actual);

/// Never throw; an unloadable output fails.
bool score_soft(const std::filesystem::path& output, const TaskInstance& task);
bool score_hard(const std::filesystem::path& output, const TaskInstance& task);

struct TaskResult
{
    std::string id;
    Category category = Category::CellLevel;
    bool soft_pass = false;
    bool hard_pass = false;
    std::optional<std::string> error;
    std::size_t agent_calls = 0;
    int sheets_sketched = 0;
    int sheets_verified = 0;
};

struct Rates
{
    std::size_t count = 0;
    std::size_t soft_passed = 0;
    std::size_t hard_passed = 0;
    double soft_percent() const { return count ? 100.0 * double(soft_passed) / double(count) : 0.0; }
    double hard_percent() const { return count ? 100.0 * double(hard_passed) / double(count) : 0.0; }
};

struct ScoreReport
{
    std::vector<TaskResult> tasks; // manifest order
    Rates cell_level, sheet_level, overall;
    agent::AgentCallStats stats; // wall clock is kept out of the JSON

    static ScoreReport aggregate(std::vector<TaskResult> tasks);
    llm::Json to_json() const;
};

/// Backends for one task. The harness wraps them for counting and deadlines.
struct TaskBackends
{
    std::shared_ptr<llm::Backend> text;
    std::shared_ptr<llm::Backend> vision; // may equal text
};
using BackendFactory = std::function<TaskBackends(const TaskInstance&)>;

struct BenchConfig
{
    agent::LoopConfig loop;
    std::size_t workers = 1;
    std::chrono::seconds task_timeout{15 * 60};
    std::filesystem::path work_root; // per-task sandboxes; a temporary directory when empty
    bool keep_sandboxes = false;
    std::string python = "python3";
    std::string data_mount = "/mnt/data";
    std::chrono::milliseconds code_timeout{60000};
    convert::RenderOptions render;
    std::optional<std::filesystem::path> archive_dir; // transcripts, one subdirectory per task
};

/// Raised inside a task once its deadline has passed.
class TaskTimeout : public Error
{
public:
    using Error::Error;
};

/// Scripted backends for both roles. A directory supplies "<task id>.json"
/// per task; a file is replayed afresh for every task.
BackendFactory scripted_factory(const std::filesystem::path& transcripts);

/// Runs sketching, solving and scoring per task; a task failure is recorded, never thrown.
ScoreReport run_benchmark(const std::vector<TaskInstance>& tasks, const BenchConfig& config,
                          const BackendFactory& backends);

/// Runs one task in `sandbox` (created if needed). Used by run_benchmark.
TaskResult run_task(const TaskInstance& task, const BenchConfig& config, const TaskBackends& backends,
                    const std::filesystem::path& sandbox);

/// The --config file (YAML or JSON): text_model/vision_model endpoints, loop
/// caps, decoding, sandbox and bench settings. Unknown keys are errors.
struct AppConfig
{
    std::optional<llm::EndpointConfig> text_model;
    std::optional<llm::EndpointConfig> vision_model; // falls back to text_model
    BenchConfig bench;
};

/// Throws ManifestError (field path) or MissingFile.
AppConfig load_config(const std::filesystem::path& path);

} // namespace sheetagent::bench
