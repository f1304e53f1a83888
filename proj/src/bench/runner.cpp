#include "sheetagent/bench.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <unistd.h>

namespace sheetagent::bench {
namespace {

using Clock = std::chrono::steady_clock;

/// Refuses new calls once the task deadline has passed. A call already in
/// flight is bounded by the endpoint timeout instead.
class DeadlineBackend : public llm::Backend
{
public:
    DeadlineBackend(llm::Backend& inner, Clock::time_point deadline, std::chrono::seconds budget)
        : inner_(inner), deadline_(deadline), budget_(budget)
    {}

    llm::ChatMessage complete(const std::vector<llm::ChatMessage>& messages, const std::vector<llm::ToolSpec>& tools,
                              const llm::DecodingParams& decoding) override
    {
        if (Clock::now() > deadline_)
            throw TaskTimeout("task exceeded its deadline of " + std::to_string(budget_.count()) + " s");
        return inner_.complete(messages, tools, decoding);
    }

private:
    llm::Backend& inner_;
    Clock::time_point deadline_;
    std::chrono::seconds budget_;
};

void replace_all(std::string& s, const std::string& from, const std::string& to)
{
    if (from.empty())
        return;
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
        s.replace(pos, from.size(), to);
}

std::filesystem::path fresh_work_root()
{
    static std::atomic<int> counter{0};
    return std::filesystem::temp_directory_path() /
           ("sheetagent-bench-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
}

} // namespace

BackendFactory scripted_factory(const std::filesystem::path& transcripts)
{
    if (std::filesystem::is_directory(transcripts))
        return [transcripts](const TaskInstance& task) {
            auto path = transcripts / (task.id + ".json");
            if (!std::filesystem::exists(path))
                throw MissingFile(path);
            std::shared_ptr<llm::Backend> b = llm::ScriptedBackend::from_file(path).clone();
            return TaskBackends{b, b};
        };
    std::shared_ptr<const llm::ScriptedBackend> shared = llm::ScriptedBackend::from_file(transcripts).clone();
    return [shared](const TaskInstance&) {
        std::shared_ptr<llm::Backend> b = shared->clone();
        return TaskBackends{b, b};
    };
}

TaskResult run_task(const TaskInstance& task, const BenchConfig& config, const TaskBackends& backends,
                    const std::filesystem::path& sandbox)
{
    TaskResult r;
    r.id = task.id;
    r.category = task.category;
    std::vector<agent::Conversation> transcripts;
    std::size_t calls = 0;
    std::filesystem::path root = sandbox;

    try {
        if (!backends.text)
            throw std::invalid_argument("no text model for task " + task.id);
        std::filesystem::create_directories(sandbox / "input");
        std::filesystem::create_directories(sandbox / "output");
        root = std::filesystem::canonical(sandbox);
        const auto staged = root / "input" / (task.id + "_input.xlsx");
        const auto output = root / "output" / (task.id + "_output.xlsx");
        std::filesystem::copy_file(task.input_path, staged, std::filesystem::copy_options::overwrite_existing);

        const auto deadline = Clock::now() + config.task_timeout;
        DeadlineBackend text_limit(*backends.text, deadline, config.task_timeout);
        DeadlineBackend vision_limit(backends.vision ? *backends.vision : *backends.text, deadline,
                                     config.task_timeout);
        agent::CountingBackend text(text_limit), vision(vision_limit);

        tools::SessionOptions so;
        so.python = config.python;
        so.sandbox_root = root;
        so.virtual_root = config.data_mount;
        so.timeout = config.code_timeout;
        tools::CodeSession session(so);

        agent::AgentEnv env;
        env.text = &text;
        env.vision = &vision;
        env.session = &session;
        env.paths = session.paths();
        env.render = config.render;

        try {
            auto wb = load_workbook(staged);
            auto sketches = agent::sketch_workbook(wb, env, config.loop);
            for (const auto& vs : sketches) {
                transcripts.insert(transcripts.end(), vs.transcripts.begin(), vs.transcripts.end());
                ++r.sheets_sketched;
                r.sheets_verified += vs.verified;
            }
            agent::Conversation solve;
            try {
                agent::solving_stage(staged, task.instruction, agent::combined_sketch_text(sketches), output, env,
                                     config.loop, solve);
            } catch (...) {
                transcripts.push_back(std::move(solve));
                throw;
            }
            transcripts.push_back(std::move(solve));
            r.soft_pass = score_soft(output, task);
            r.hard_pass = r.soft_pass && score_hard(output, task);
        } catch (agent::PipelineError& e) {
            transcripts.insert(transcripts.end(), e.transcripts.begin(), e.transcripts.end());
            r.error = e.what();
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        calls = text.calls() + vision.calls();
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.agent_calls = calls;
    // sandbox locations differ between runs; reports should not
    if (r.error)
        replace_all(*r.error, root.string(), config.data_mount);

    if (config.archive_dir) {
        try {
            agent::archive_transcripts(transcripts, *config.archive_dir / task.id);
        } catch (const std::exception& e) {
            if (!r.error)
                r.error = std::string("transcript archive failed: ") + e.what();
        }
    }
    return r;
}

ScoreReport run_benchmark(const std::vector<TaskInstance>& tasks, const BenchConfig& config,
                          const BackendFactory& backends)
{
    config.loop.validate();
    const bool temporary = config.work_root.empty();
    const auto work_root = temporary ? fresh_work_root() : config.work_root;
    std::filesystem::create_directories(work_root);

    std::vector<TaskResult> results(tasks.size());
    std::vector<double> seconds(tasks.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::mutex factory_mu;

    auto worker = [&] {
        for (auto i = next++; i < tasks.size(); i = next++) {
            const auto& task = tasks[i];
            const auto start = Clock::now();
            TaskBackends b;
            try {
                std::lock_guard lock(factory_mu);
                b = backends(task);
            } catch (const std::exception& e) {
                results[i] = {task.id, task.category, false, false, std::string("backend setup failed: ") + e.what()};
                continue;
            }
            results[i] = run_task(task, config, b, work_root / ("task" + std::to_string(i + 1)));
            seconds[i] = std::chrono::duration<double>(Clock::now() - start).count();
        }
    };
    const auto n = std::max<std::size_t>(1, std::min(config.workers, tasks.size()));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n; ++k)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();

    if (temporary && !config.keep_sandboxes) {
        std::error_code ec;
        std::filesystem::remove_all(work_root, ec);
    }
    auto report = ScoreReport::aggregate(std::move(results));
    for (double s : seconds)
        report.stats.wall_clock_seconds += s;
    return report;
}

} // namespace sheetagent::bench
