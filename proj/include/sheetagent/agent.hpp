#pragma once

#include "sheetagent/sketch.hpp"
#include "sheetagent/tools.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

namespace sheetagent::agent {

struct LoopConfig
{
    int max_tool_rounds = 20;      // assistant turns per stage run
    int max_refine_iterations = 3; // extraction + dual verification cycles
    llm::DecodingParams decoding;

    /// Throws std::invalid_argument for non-positive caps.
    void validate() const;
};

struct Conversation
{
    std::string label; // "extraction", "verification:vision", ...
    std::vector<llm::ChatMessage> messages;
    int rounds_used = 0; // in the most recent run_tool_loop call
    bool cap_hit = false;

    llm::Json to_json() const;
};

/// Counts complete() calls on a wrapped backend. Safe to share between threads.
class CountingBackend : public llm::Backend
{
public:
    explicit CountingBackend(llm::Backend& inner) : inner_(inner) {}

    llm::ChatMessage complete(const std::vector<llm::ChatMessage>& messages, const std::vector<llm::ToolSpec>& tools,
                              const llm::DecodingParams& decoding) override;

    std::size_t calls() const { return calls_.load(); }
    double seconds() const { return double(micros_.load()) / 1e6; }

private:
    llm::Backend& inner_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::int64_t> micros_{0};
};

struct AgentCallStats
{
    std::size_t total_agent_calls = 0;
    double wall_clock_seconds = 0;
};

/// Everything a stage needs besides its inputs. Backends are the two model
/// roles; the session may be null when no stage needs code execution.
struct AgentEnv
{
    llm::Backend* text = nullptr;
    llm::Backend* vision = nullptr;
    tools::CodeSession* session = nullptr;
    std::optional<tools::PathMap> paths; // defaults to the session's mapping
    convert::RenderOptions render;

    tools::ToolEnv tool_env(const LoopConfig& config) const;
    /// The spelling of a host path that tools and the guest understand.
    std::string visible_path(const std::filesystem::path& host) const;
};

enum class Channel { Vision, Latex };
std::string_view to_string(Channel c);

/// A backend failure after some stages already ran.
class PipelineError : public Error
{
public:
    PipelineError(const std::string& what, std::vector<Conversation> partial)
        : Error(what), transcripts(std::move(partial))
    {}

    std::vector<Conversation> transcripts;
};

class SolveFailed : public Error
{
public:
    using Error::Error;
};

struct VerifiedSketch
{
    std::string sheet_name;
    std::string sketch_text; // the final candidate, verbatim
    std::vector<sketch::TableSketch> sketches;
    bool verified = false;
    int iterations_used = 0;
    std::vector<sketch::VerificationReport> vision_reports; // one per iteration
    std::vector<sketch::VerificationReport> latex_reports;
    std::vector<Conversation> transcripts;
};

/// Calls the backend until it answers without tool calls or the round cap is
/// hit. Every appended message is truncated to the per-round budget first.
/// Returns the last assistant text. Backend errors propagate.
std::string run_tool_loop(Conversation& ctx, llm::Backend& backend, const tools::Registry& registry,
                          tools::ToolEnv& env, const LoopConfig& config);

/// Seeds `ctx` with the extraction prompt and runs the loop with all five tools.
std::string extraction_stage(const Workbook& wb, const std::string& sheet_name, AgentEnv& env,
                             const LoopConfig& config, Conversation& ctx);

/// Fresh context per call; tools restricted to the channel's converter and QA tool.
sketch::VerificationReport verification_stage(Channel channel, const Workbook& wb, const std::string& sheet_name,
                                              const std::string& sketch_text, AgentEnv& env,
                                              const LoopConfig& config, Conversation& ctx);

/// Feedback turn appended to the extraction context after a failed iteration.
std::string feedback_message(const sketch::VerificationReport& vision, const sketch::VerificationReport& latex);

/// Throws PipelineError carrying the transcripts gathered so far.
VerifiedSketch extraction_verification_loop(const Workbook& wb, const std::string& sheet_name, AgentEnv& env,
                                            const LoopConfig& config);

/// Runs the loop on every non-empty sheet. Throws PipelineError.
std::vector<VerifiedSketch> sketch_workbook(const Workbook& wb, AgentEnv& env, const LoopConfig& config);

/// Text injected into the solving context: the sketches of all sheets, each
/// flagged when unverified.
std::string combined_sketch_text(const std::vector<VerifiedSketch>& sketches);

/// Seeds a context with the instruction and sketch, offers execute_python only,
/// and expects the guest to write `output` (a host path inside the sandbox).
/// Returns `output`; throws SolveFailed when the file is missing or unreadable.
std::filesystem::path solving_stage(const std::filesystem::path& input, const std::string& instruction,
                                    const std::string& sketch_text, const std::filesystem::path& output,
                                    AgentEnv& env, const LoopConfig& config, Conversation& ctx);

/// Writes one JSON file per conversation into dir ("<prefix><label>.json").
void archive_transcripts(const std::vector<Conversation>& transcripts, const std::filesystem::path& dir,
                         const std::string& prefix = "");

} // namespace sheetagent::agent
