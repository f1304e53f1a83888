#include "sheetagent/bench.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

using namespace sheetagent;
namespace fs = std::filesystem;

namespace {

constexpr int kExitFailed = 1; // the run completed with a negative verdict
constexpr int kExitError = 2;

struct Globals
{
    std::string config_path;
    std::string scripted;
    std::string seed_archive;
};

class UsageError : public std::runtime_error
{
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw UsageError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view data)
{
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), std::streamsize(data.size()));
    if (!out)
        throw UsageError("cannot write " + p.string());
}

/// Model roles for a single-workbook command.
struct Models
{
    std::shared_ptr<llm::Backend> text, vision;
};

Models make_models(const Globals& g, const bench::AppConfig& config)
{
    if (!g.scripted.empty()) {
        if (fs::is_directory(g.scripted))
            throw UsageError("--scripted must name a transcript file here; directories are for bench");
        std::shared_ptr<llm::Backend> b = llm::ScriptedBackend::from_file(g.scripted).clone();
        return {b, b};
    }
    if (!config.text_model)
        throw UsageError("no model configured; pass --config with text_model, or --scripted");
    Models m;
    m.text = std::make_shared<llm::HttpBackend>(*config.text_model);
    m.vision = config.vision_model ? std::make_shared<llm::HttpBackend>(*config.vision_model) : m.text;
    return m;
}

/// A staging directory the guest sees as the data mount. The input workbook
/// is copied to input/; outputs go to output/.
class Sandbox
{
public:
    Sandbox(const bench::BenchConfig& c, const fs::path& input) : keep_(c.keep_sandboxes)
    {
        if (c.work_root.empty()) {
            root_ = fs::temp_directory_path() / ("sheetagent-" + std::to_string(::getpid()));
            owned_ = true;
        } else {
            root_ = c.work_root;
        }
        fs::create_directories(root_ / "input");
        fs::create_directories(root_ / "output");
        root_ = fs::canonical(root_);
        staged_ = root_ / "input" / input.filename();
        fs::copy_file(input, staged_, fs::copy_options::overwrite_existing);

        tools::SessionOptions so;
        so.python = c.python;
        so.sandbox_root = root_;
        so.virtual_root = c.data_mount;
        so.timeout = c.code_timeout;
        session_ = std::make_unique<tools::CodeSession>(so);
    }
    ~Sandbox()
    {
        session_.reset();
        if (owned_ && !keep_) {
            std::error_code ec;
            fs::remove_all(root_, ec);
        }
    }

    const fs::path& root() const { return root_; }
    const fs::path& staged() const { return staged_; }
    tools::CodeSession& session() { return *session_; }

private:
    fs::path root_, staged_;
    bool owned_ = false, keep_;
    std::unique_ptr<tools::CodeSession> session_;
};

/// Backends, counters and sandbox for one command run. Every stage sees the
/// workbook through the data mount, as the bench does.
struct Run
{
    Run(const Globals& g, const bench::AppConfig& config, const fs::path& input)
        : models(make_models(g, config)), text(*models.text), vision(*models.vision)
    {
        env.text = &text;
        env.vision = &vision;
        env.render = config.bench.render;
        sandbox.emplace(config.bench, input);
        env.session = &sandbox->session();
        env.paths = sandbox->session().paths();
    }

    void report(const Globals& g, const std::vector<agent::Conversation>& transcripts)
    {
        if (!g.seed_archive.empty())
            agent::archive_transcripts(transcripts, g.seed_archive);
        std::cerr << "agent calls: " << text.calls() + vision.calls() << ", model seconds: "
                  << text.seconds() + vision.seconds() << "\n";
    }

    Models models;
    agent::CountingBackend text, vision;
    agent::AgentEnv env;
    std::optional<Sandbox> sandbox;
};

std::string pick_sheet(const Workbook& wb, const std::string& requested)
{
    if (!requested.empty())
        return wb.sheet(requested).name();
    if (wb.sheets().empty())
        throw UsageError("workbook has no sheets");
    return wb.sheets().front().name();
}

void emit(const std::string& out, const std::string& text)
{
    if (out.empty() || out == "-")
        std::cout << text << (text.empty() || text.back() == '\n' ? "" : "\n");
    else
        write_file(out, text);
}

void print_report(const char* channel, const sketch::VerificationReport& r)
{
    std::cout << channel << ": " << (r.passed ? "pass" : "fail") << "\n";
    for (const auto& issue : r.issues)
        std::cout << "  - " << issue << "\n";
}

int cmd_extract(const Globals& g, const bench::AppConfig& config, const std::string& xlsx, const std::string& sheet,
                const std::string& out)
{
    auto wb = load_workbook(xlsx);
    Run run(g, config, xlsx);
    auto staged = load_workbook(run.sandbox->staged());
    agent::Conversation ctx;
    std::string text;
    try {
        text = agent::extraction_stage(staged, pick_sheet(wb, sheet), run.env, config.bench.loop, ctx);
    } catch (...) {
        run.report(g, {ctx});
        throw;
    }
    run.report(g, {ctx});
    auto blocks = sketch::extract_yaml_blocks(text);
    std::string yaml;
    for (const auto& b : blocks)
        yaml += (yaml.empty() ? "" : "---\n") + b + (b.empty() || b.back() == '\n' ? "" : "\n");
    emit(out, blocks.empty() ? text : yaml);
    if (blocks.empty()) {
        std::cerr << "warning: the model answer contained no YAML block; wrote it verbatim\n";
        return kExitFailed;
    }
    return 0;
}

/// Sketch files may be bare YAML (documents split by ---) or markdown with fences.
std::string fenced_sketch(const std::string& text)
{
    if (!sketch::extract_yaml_blocks(text).empty())
        return text;
    std::string out, doc;
    std::istringstream in(text);
    std::string line;
    auto flush = [&] {
        if (doc.find_first_not_of(" \t\r\n") != std::string::npos)
            out += (out.empty() ? "" : "\n\n") + sketch::fence(doc);
        doc.clear();
    };
    while (std::getline(in, line)) {
        if (line == "---") {
            flush();
            continue;
        }
        doc += line + "\n";
    }
    flush();
    return out;
}

int cmd_verify(const Globals& g, const bench::AppConfig& config, const std::string& xlsx,
               const std::string& sketch_path, const std::string& channel, const std::string& sheet)
{
    const auto sketch_text = fenced_sketch(read_file(sketch_path));
    Run run(g, config, xlsx);
    auto wb = load_workbook(run.sandbox->staged());
    auto parsed = sketch::parse_sketches(sketch_text);

    std::string sheet_name = sheet;
    if (sheet_name.empty() && !parsed.sketches.empty())
        sheet_name = parsed.sketches.front().sheet_name;
    sheet_name = pick_sheet(wb, sheet_name);

    std::size_t local_errors = 0;
    for (const auto& e : parsed.errors) {
        std::cout << "schema: " << e.what() << "\n";
        ++local_errors;
    }
    for (const auto& s : parsed.sketches)
        for (const auto& v : sketch::validate_sketch(s, wb)) {
            std::cout << (v.severity == sketch::Severity::Error ? "error" : "warning") << ": " << v.message;
            if (v.location)
                std::cout << " (" << format_range(*v.location) << ")";
            std::cout << "\n";
            local_errors += v.severity == sketch::Severity::Error;
        }

    std::vector<agent::Conversation> transcripts;
    bool passed = true;
    try {
        for (auto c : {agent::Channel::Vision, agent::Channel::Latex}) {
            if (channel != "both" && channel != agent::to_string(c))
                continue;
            agent::Conversation ctx;
            try {
                auto r = agent::verification_stage(c, wb, sheet_name, sketch_text, run.env, config.bench.loop, ctx);
                transcripts.push_back(std::move(ctx));
                print_report(std::string(agent::to_string(c)).c_str(), r);
                passed = passed && r.passed;
            } catch (...) {
                transcripts.push_back(std::move(ctx));
                throw;
            }
        }
    } catch (...) {
        run.report(g, transcripts);
        throw;
    }
    run.report(g, transcripts);
    return passed && local_errors == 0 ? 0 : kExitFailed;
}

int cmd_loop(const Globals& g, bench::AppConfig config, const std::string& xlsx, int max_iters,
             const std::string& sheet, const std::string& out)
{
    if (max_iters > 0)
        config.bench.loop.max_refine_iterations = max_iters;
    config.bench.loop.validate();
    Run run(g, config, xlsx);
    auto wb = load_workbook(run.sandbox->staged());

    std::vector<agent::VerifiedSketch> results;
    try {
        if (sheet.empty())
            results = agent::sketch_workbook(wb, run.env, config.bench.loop);
        else
            results.push_back(agent::extraction_verification_loop(wb, pick_sheet(wb, sheet), run.env,
                                                                  config.bench.loop));
    } catch (agent::PipelineError& e) {
        run.report(g, e.transcripts);
        throw;
    }

    std::vector<agent::Conversation> transcripts;
    bool all_verified = true;
    for (const auto& r : results) {
        transcripts.insert(transcripts.end(), r.transcripts.begin(), r.transcripts.end());
        std::cerr << "sheet '" << r.sheet_name << "': " << (r.verified ? "verified" : "not verified") << " after "
                  << r.iterations_used << " iteration(s)\n";
        all_verified = all_verified && r.verified;
    }
    run.report(g, transcripts);
    emit(out, agent::combined_sketch_text(results));
    return all_verified ? 0 : kExitFailed;
}

int cmd_solve(const Globals& g, const bench::AppConfig& config, const std::string& xlsx,
              const std::string& instruction, const std::string& sketch_path, const std::string& out)
{
    const auto sketch_text = fenced_sketch(read_file(sketch_path));
    Run run(g, config, xlsx);
    const auto output = run.sandbox->root() / "output" / fs::path(out).filename();
    agent::Conversation ctx;
    try {
        agent::solving_stage(run.sandbox->staged(), instruction, sketch_text, output, run.env, config.bench.loop,
                             ctx);
    } catch (...) {
        run.report(g, {ctx});
        throw;
    }
    run.report(g, {ctx});
    if (fs::path(out).has_parent_path())
        fs::create_directories(fs::path(out).parent_path());
    fs::copy_file(output, out, fs::copy_options::overwrite_existing);
    std::cerr << "wrote " << out << "\n";
    return 0;
}

int cmd_convert(const bench::AppConfig& config, const std::string& xlsx, const std::string& sheet_arg,
                const std::string& range_arg, const std::string& to, const std::string& out)
{
    auto wb = load_workbook(xlsx);
    const auto& sheet = wb.sheet(pick_sheet(wb, sheet_arg));
    std::optional<RangeRef> range;
    if (range_arg.empty()) {
        range = used_range(sheet);
        if (!range)
            throw UsageError("sheet '" + sheet.name() + "' is empty; there is nothing to convert");
    } else {
        range = parse_range(range_arg);
    }
    if (to == "latex") {
        emit(out, convert::range_to_latex(sheet, *range));
        return 0;
    }
    if (out.empty() || out == "-")
        throw UsageError("--to image needs --out FILE");
    auto img = convert::range_to_image(sheet, *range, config.bench.render);
    write_file(out, img.png);
    std::cerr << "wrote " << out << " (" << img.width_px << "x" << img.height_px << " px)\n";
    return 0;
}

void print_rates(const char* name, const bench::Rates& r)
{
    std::printf("%-12s %5zu %9.2f%% %9.2f%%\n", name, r.count, r.soft_percent(), r.hard_percent());
}

int cmd_bench(const Globals& g, bench::AppConfig config, const std::string& dir, const std::string& report_path)
{
    auto tasks = bench::load_tasks(dir);
    bench::BackendFactory factory;
    if (!g.scripted.empty()) {
        factory = bench::scripted_factory(g.scripted);
    } else {
        if (!config.text_model)
            throw UsageError("no model configured; pass --config with text_model, or --scripted");
        auto text = config.text_model;
        auto vision = config.vision_model ? config.vision_model : config.text_model;
        factory = [text, vision](const bench::TaskInstance&) {
            std::shared_ptr<llm::Backend> t = std::make_shared<llm::HttpBackend>(*text);
            std::shared_ptr<llm::Backend> v = std::make_shared<llm::HttpBackend>(*vision);
            return bench::TaskBackends{t, v};
        };
    }
    if (!g.seed_archive.empty())
        config.bench.archive_dir = g.seed_archive;

    auto report = bench::run_benchmark(tasks, config.bench, factory);
    for (const auto& t : report.tasks) {
        std::printf("%-24s %-11s soft=%s hard=%s calls=%zu", t.id.c_str(), std::string(to_string(t.category)).c_str(),
                    t.soft_pass ? "pass" : "fail", t.hard_pass ? "pass" : "fail", t.agent_calls);
        if (t.error)
            std::printf("  error: %s", t.error->c_str());
        std::printf("\n");
    }
    std::printf("%-12s %5s %10s %10s\n", "", "tasks", "soft", "hard");
    print_rates("cell-level", report.cell_level);
    print_rates("sheet-level", report.sheet_level);
    print_rates("overall", report.overall);
    std::printf("agent calls: %zu, wall clock: %.2f s\n", report.stats.total_agent_calls,
                report.stats.wall_clock_seconds);
    if (!report_path.empty())
        write_file(report_path, report.to_json().dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spreadsheet structure extraction and manipulation agent"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "YAML or JSON config: endpoints, loop caps, decoding, sandbox")
        ->check(CLI::ExistingFile);
    app.add_option("--scripted", g.scripted,
                   "replay a transcript instead of calling models (bench: a directory of <task id>.json)")
        ->check(CLI::ExistingPath);
    app.add_option("--seed-archive", g.seed_archive, "write every conversation as JSON into this directory");

    std::string xlsx, sheet, out, sketch_path, channel = "both", instruction, range, to, dir, report;
    int max_iters = 0;

    auto* extract = app.add_subcommand("extract", "run the extraction stage and print the sketch");
    extract->add_option("xlsx", xlsx)->required()->check(CLI::ExistingFile);
    extract->add_option("--sheet", sheet, "sheet name (default: the first sheet)");
    extract->add_option("--out", out, "write the sketch YAML here instead of stdout");

    auto* verify = app.add_subcommand("verify", "check a sketch through the vision and LaTeX channels");
    verify->add_option("xlsx", xlsx)->required()->check(CLI::ExistingFile);
    verify->add_option("sketch", sketch_path)->required()->check(CLI::ExistingFile);
    verify->add_option("--channel", channel)->check(CLI::IsMember({"vision", "latex", "both"}));
    verify->add_option("--sheet", sheet, "sheet name (default: the sketch's sheet_name)");

    auto* loop = app.add_subcommand("loop", "extract and verify until both channels pass");
    loop->add_option("xlsx", xlsx)->required()->check(CLI::ExistingFile);
    loop->add_option("--max-iters", max_iters)->check(CLI::PositiveNumber);
    loop->add_option("--sheet", sheet, "one sheet only (default: every non-empty sheet)");
    loop->add_option("--out", out, "write the final sketches here instead of stdout");

    auto* solve = app.add_subcommand("solve", "carry out an instruction with a sketch as context");
    solve->add_option("xlsx", xlsx)->required()->check(CLI::ExistingFile);
    solve->add_option("--instruction", instruction)->required();
    solve->add_option("--sketch", sketch_path)->required()->check(CLI::ExistingFile);
    solve->add_option("--out", out)->required();

    auto* conv = app.add_subcommand("convert", "render a range as LaTeX or PNG");
    conv->add_option("xlsx", xlsx)->required()->check(CLI::ExistingFile);
    conv->add_option("--range", range, "A1 range (default: the used range)");
    conv->add_option("--sheet", sheet, "sheet name (default: the first sheet)");
    conv->add_option("--to", to)->required()->check(CLI::IsMember({"latex", "image"}));
    conv->add_option("--out", out, "output file (LaTeX defaults to stdout)");

    auto* bench_cmd = app.add_subcommand("bench", "run and score a task manifest");
    bench_cmd->add_option("dir", dir, "directory holding manifest.json")->required()->check(CLI::ExistingDirectory);
    bench_cmd->add_option("--report", report, "write the JSON score report here");

    CLI11_PARSE(app, argc, argv);

    try {
        bench::AppConfig config;
        if (!g.config_path.empty())
            config = bench::load_config(g.config_path);

        if (*extract)
            return cmd_extract(g, config, xlsx, sheet, out);
        if (*verify)
            return cmd_verify(g, config, xlsx, sketch_path, channel, sheet);
        if (*loop)
            return cmd_loop(g, config, xlsx, max_iters, sheet, out);
        if (*solve)
            return cmd_solve(g, config, xlsx, instruction, sketch_path, out);
        if (*conv)
            return cmd_convert(config, xlsx, sheet, range, to, out);
        if (*bench_cmd)
            return cmd_bench(g, config, dir, report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
