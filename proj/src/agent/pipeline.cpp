#include "sheetagent/agent.hpp"
#include "sheetagent/assets.hpp"

#include <chrono>
#include <fstream>

namespace sheetagent::agent {
namespace {

using llm::ChatMessage;

ChatMessage fit(ChatMessage m, const LoopConfig& config)
{
    try {
        return llm::truncate_to_budget(m, config.decoding.max_tokens_per_round);
    } catch (const llm::UnsatisfiableBudget&) {
        // only tool-call arguments are left to cut, and cutting them breaks the call
        return m;
    }
}

void seed(Conversation& ctx, std::string label, std::string prompt, const LoopConfig& config)
{
    ctx.label = std::move(label);
    ctx.messages.clear();
    ctx.messages.push_back(fit(ChatMessage::user(std::move(prompt)), config));
    ctx.rounds_used = 0;
    ctx.cap_hit = false;
}

std::string used_range_text(const Sheet& sheet)
{
    auto used = used_range(sheet);
    return used ? format_range(*used) : "empty";
}

llm::Backend& need(llm::Backend* b, const char* role)
{
    if (!b)
        throw std::invalid_argument(std::string("no ") + role + " model configured");
    return *b;
}

// The candidate's YAML blocks as the model wrote them; the whole text when it has none.
std::string yaml_only(const std::string& candidate)
{
    auto blocks = sketch::extract_yaml_blocks(candidate);
    if (blocks.empty())
        return candidate;
    std::string out;
    for (const auto& b : blocks)
        out += (out.empty() ? "" : "\n") + sketch::fence(b);
    return out;
}

} // namespace

void LoopConfig::validate() const
{
    if (max_tool_rounds < 1)
        throw std::invalid_argument("max_tool_rounds must be positive");
    if (max_refine_iterations < 1)
        throw std::invalid_argument("max_refine_iterations must be positive");
    if (decoding.max_tokens_per_round < 64)
        throw std::invalid_argument("max_tokens_per_round must be at least 64");
}

llm::Json Conversation::to_json() const
{
    llm::Json msgs = llm::Json::array();
    for (const auto& m : messages)
        msgs.push_back(llm::message_to_json(m));
    return {{"label", label}, {"rounds_used", rounds_used}, {"cap_hit", cap_hit}, {"messages", std::move(msgs)}};
}

ChatMessage CountingBackend::complete(const std::vector<ChatMessage>& messages, const std::vector<llm::ToolSpec>& tools,
                                      const llm::DecodingParams& decoding)
{
    ++calls_;
    auto start = std::chrono::steady_clock::now();
    struct Stamp
    {
        std::atomic<std::int64_t>& sink;
        std::chrono::steady_clock::time_point start;
        ~Stamp()
        {
            sink += std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start)
                        .count();
        }
    } stamp{micros_, start};
    return inner_.complete(messages, tools, decoding);
}

tools::ToolEnv AgentEnv::tool_env(const LoopConfig& config) const
{
    tools::ToolEnv t;
    t.session = session;
    t.vision = vision;
    t.text = text;
    t.decoding = config.decoding;
    t.render = render;
    t.paths = paths;
    return t;
}

std::string AgentEnv::visible_path(const std::filesystem::path& host) const
{
    if (paths)
        return paths->to_virtual(host);
    if (session)
        return session->paths().to_virtual(host);
    return host.string();
}

std::string_view to_string(Channel c) { return c == Channel::Vision ? "vision" : "latex"; }

std::string run_tool_loop(Conversation& ctx, llm::Backend& backend, const tools::Registry& registry,
                          tools::ToolEnv& env, const LoopConfig& config)
{
    config.validate();
    ctx.rounds_used = 0;
    ctx.cap_hit = false;
    std::string last;
    while (ctx.rounds_used < config.max_tool_rounds) {
        auto reply = backend.complete(ctx.messages, registry.specs(), config.decoding);
        ++ctx.rounds_used;
        last = reply.text();
        const auto calls = reply.tool_calls;
        ctx.messages.push_back(fit(std::move(reply), config));
        if (calls.empty())
            return last;
        for (const auto& call : calls)
            ctx.messages.push_back(fit(registry.dispatch(call, env).to_message(), config));
    }
    ctx.cap_hit = true;
    return last;
}

std::string extraction_stage(const Workbook& wb, const std::string& sheet_name, AgentEnv& env,
                             const LoopConfig& config, Conversation& ctx)
{
    const auto& sheet = wb.sheet(sheet_name);
    auto prompt = fill_template(asset("prompts/extraction.txt"), {{"spreadsheet_path", env.visible_path(wb.source_path())},
                                                                  {"sheet_name", sheet.name()},
                                                                  {"used_range", used_range_text(sheet)}});
    seed(ctx, "extraction", std::move(prompt), config);
    auto tool_env = env.tool_env(config);
    return run_tool_loop(ctx, need(env.text, "text"), tools::Registry::all(), tool_env, config);
}

sketch::VerificationReport verification_stage(Channel channel, const Workbook& wb, const std::string& sheet_name,
                                              const std::string& sketch_text, AgentEnv& env,
                                              const LoopConfig& config, Conversation& ctx)
{
    if (sketch_text.empty())
        throw std::invalid_argument("nothing to verify: the sketch text is empty");
    const auto& sheet = wb.sheet(sheet_name);
    auto prompt = fill_template(asset("prompts/verification.txt"),
                                {{"spreadsheet_path", env.visible_path(wb.source_path())},
                                 {"sheet_name", sheet.name()},
                                 {"used_range", used_range_text(sheet)},
                                 {"spreadsheet_info", yaml_only(sketch_text)}});
    seed(ctx, "verification-" + std::string(to_string(channel)), std::move(prompt), config);

    const bool vision = channel == Channel::Vision;
    const tools::Registry registry = vision ? tools::Registry({tools::kExcelToImage, tools::kVisionQA})
                                            : tools::Registry({tools::kExcelToLatex, tools::kLatexQA});
    auto tool_env = env.tool_env(config);
    tool_env.session = nullptr; // verifiers never run code
    auto& backend = vision ? need(env.vision, "vision") : need(env.text, "text");
    return sketch::parse_verification(run_tool_loop(ctx, backend, registry, tool_env, config));
}

std::string feedback_message(const sketch::VerificationReport& vision, const sketch::VerificationReport& latex)
{
    std::string out = "Verification issues to fix:\n";
    for (const auto& issue : vision.issues)
        out += "- [vision] " + issue + "\n";
    for (const auto& issue : latex.issues)
        out += "- [latex] " + issue + "\n";
    out += "\nRevise the structure to resolve every issue and output the complete corrected YAML.";
    return out;
}

VerifiedSketch extraction_verification_loop(const Workbook& wb, const std::string& sheet_name, AgentEnv& env,
                                            const LoopConfig& config)
{
    config.validate();
    VerifiedSketch vs;
    vs.sheet_name = sheet_name;
    Conversation extraction;
    Conversation in_flight; // verification context of the stage that is running
    try {
        for (int it = 1; it <= config.max_refine_iterations; ++it) {
            vs.iterations_used = it;
            if (it == 1) {
                vs.sketch_text = extraction_stage(wb, sheet_name, env, config, extraction);
            } else {
                auto tool_env = env.tool_env(config);
                vs.sketch_text =
                    run_tool_loop(extraction, need(env.text, "text"), tools::Registry::all(), tool_env, config);
            }

            // An empty candidate cannot be verified; both channels fail it.
            sketch::VerificationReport reports[2];
            for (auto channel : {Channel::Vision, Channel::Latex}) {
                auto& report = reports[channel == Channel::Latex];
                if (vs.sketch_text.empty()) {
                    report = {false, {"the extraction stage produced no structure"}};
                    continue;
                }
                report = verification_stage(channel, wb, sheet_name, vs.sketch_text, env, config, in_flight);
                in_flight.label += "-" + std::to_string(it);
                vs.transcripts.push_back(std::move(in_flight));
                in_flight = {};
            }
            vs.vision_reports.push_back(reports[0]);
            vs.latex_reports.push_back(reports[1]);

            if (reports[0].passed && reports[1].passed) {
                vs.verified = true;
                break;
            }
            if (it < config.max_refine_iterations)
                extraction.messages.push_back(fit(ChatMessage::user(feedback_message(reports[0], reports[1])), config));
        }
    } catch (const std::exception& e) {
        auto partial = vs.transcripts;
        partial.insert(partial.begin(), extraction);
        if (!in_flight.messages.empty())
            partial.push_back(in_flight);
        throw PipelineError(std::string("sketching sheet '") + sheet_name + "' failed: " + e.what(),
                            std::move(partial));
    }
    vs.transcripts.insert(vs.transcripts.begin(), std::move(extraction));
    vs.sketches = sketch::parse_sketches(vs.sketch_text).sketches;
    return vs;
}

std::vector<VerifiedSketch> sketch_workbook(const Workbook& wb, AgentEnv& env, const LoopConfig& config)
{
    std::vector<VerifiedSketch> out;
    std::vector<Conversation> done;
    const bool many = wb.sheets().size() > 1;
    for (std::size_t i = 0; i < wb.sheets().size(); ++i) {
        const auto& sheet = wb.sheets()[i];
        if (!used_range(sheet))
            continue;
        const auto prefix = many ? "sheet" + std::to_string(i + 1) + "-" : std::string();
        try {
            auto vs = extraction_verification_loop(wb, sheet.name(), env, config);
            for (auto& c : vs.transcripts) {
                c.label = prefix + c.label;
                done.push_back(c);
            }
            out.push_back(std::move(vs));
        } catch (PipelineError& e) {
            for (auto& c : e.transcripts)
                c.label = prefix + c.label;
            e.transcripts.insert(e.transcripts.begin(), done.begin(), done.end());
            throw;
        }
    }
    return out;
}

std::string combined_sketch_text(const std::vector<VerifiedSketch>& sketches)
{
    if (sketches.empty())
        return "(no populated sheets were found, so no structure is available)";
    std::string out;
    for (const auto& vs : sketches) {
        if (!out.empty())
            out += "\n";
        out += "Sheet '" + vs.sheet_name + "' (" +
               (vs.verified ? std::string("verified") : "unverified after " + std::to_string(vs.iterations_used) +
                                                             " iterations, use with care") +
               "):\n";
        out += vs.sketch_text.empty() ? "(no structure)\n" : yaml_only(vs.sketch_text);
        if (out.back() != '\n')
            out += '\n';
    }
    return out;
}

std::filesystem::path solving_stage(const std::filesystem::path& input, const std::string& instruction,
                                    const std::string& sketch_text, const std::filesystem::path& output,
                                    AgentEnv& env, const LoopConfig& config, Conversation& ctx)
{
    if (instruction.empty())
        throw std::invalid_argument("the solving stage needs an instruction");
    if (!env.session)
        throw std::invalid_argument("the solving stage needs a code session");
    std::error_code ec;
    std::filesystem::remove(output, ec);
    std::filesystem::create_directories(output.parent_path(), ec);

    auto prompt = fill_template(asset("prompts/solving.txt"), {{"instruction", instruction},
                                                                {"input_path", env.visible_path(input)},
                                                                {"output_path", env.visible_path(output)},
                                                                {"sketch", sketch_text}});
    seed(ctx, "solving", std::move(prompt), config);
    auto tool_env = env.tool_env(config);
    run_tool_loop(ctx, need(env.text, "text"), tools::Registry({tools::kExecutePython}), tool_env, config);

    if (!std::filesystem::exists(output))
        throw SolveFailed("no output workbook was written to " + env.visible_path(output) +
                          (ctx.cap_hit ? " before the round cap was reached" : ""));
    try {
        load_workbook(output);
    } catch (const Error& e) {
        throw SolveFailed("the output at " + env.visible_path(output) + " is not a readable workbook: " + e.what());
    }
    return output;
}

void archive_transcripts(const std::vector<Conversation>& transcripts, const std::filesystem::path& dir,
                         const std::string& prefix)
{
    std::filesystem::create_directories(dir);
    for (const auto& c : transcripts) {
        auto path = dir / (prefix + c.label + ".json");
        std::ofstream out(path, std::ios::binary);
        out << c.to_json().dump(2) << "\n";
        if (!out)
            throw IoError("cannot write transcript " + path.string());
    }
}

} // namespace sheetagent::agent
