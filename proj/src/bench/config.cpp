#include "sheetagent/bench.hpp"

#include <yaml-cpp/yaml.h>

#include <set>

namespace sheetagent::bench {
namespace {

void only_keys(const YAML::Node& map, const std::string& where, std::set<std::string> allowed)
{
    if (!map.IsMap())
        throw ManifestError(where, "expected a mapping");
    for (const auto& kv : map) {
        auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            throw ManifestError(where.empty() ? key : where + "." + key, "unknown key");
    }
}

template <typename T>
void read(const YAML::Node& map, const std::string& where, const char* key, T& out)
{
    if (!map[key])
        return;
    try {
        out = map[key].as<T>();
    } catch (const YAML::Exception& e) {
        throw ManifestError(where + "." + key, e.msg);
    }
}

template <typename T>
void read_positive(const YAML::Node& map, const std::string& where, const char* key, T& out)
{
    read(map, where, key, out);
    if (map[key] && !(out > 0))
        throw ManifestError(where + "." + key, "must be positive");
}

llm::EndpointConfig endpoint(const YAML::Node& n, const std::string& where)
{
    only_keys(n, where, {"base_url", "model", "api_key_env", "retries", "backoff_ms", "timeout_seconds"});
    llm::EndpointConfig e;
    read(n, where, "base_url", e.base_url);
    read(n, where, "model", e.model);
    read(n, where, "api_key_env", e.api_key_env);
    read(n, where, "retries", e.retries);
    long backoff = e.backoff.count(), timeout = e.timeout.count();
    read(n, where, "backoff_ms", backoff);
    read_positive(n, where, "timeout_seconds", timeout);
    e.backoff = std::chrono::milliseconds(backoff);
    e.timeout = std::chrono::seconds(timeout);
    if (e.base_url.empty())
        throw ManifestError(where + ".base_url", "required");
    if (e.model.empty())
        throw ManifestError(where + ".model", "required");
    if (e.retries < 0)
        throw ManifestError(where + ".retries", "must not be negative");
    return e;
}

} // namespace

AppConfig load_config(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path))
        throw MissingFile(path);
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
        throw ManifestError("(document)", e.what());
    }
    AppConfig c;
    if (!root || root.IsNull())
        return c;
    only_keys(root, "", {"text_model", "vision_model", "loop", "decoding", "sandbox", "bench"});

    if (root["text_model"])
        c.text_model = endpoint(root["text_model"], "text_model");
    if (root["vision_model"])
        c.vision_model = endpoint(root["vision_model"], "vision_model");

    auto& b = c.bench;
    if (auto n = root["loop"]) {
        only_keys(n, "loop", {"max_tool_rounds", "max_refine_iterations"});
        read_positive(n, "loop", "max_tool_rounds", b.loop.max_tool_rounds);
        read_positive(n, "loop", "max_refine_iterations", b.loop.max_refine_iterations);
    }
    if (auto n = root["decoding"]) {
        only_keys(n, "decoding", {"temperature", "top_p", "max_tokens_per_round"});
        read(n, "decoding", "temperature", b.loop.decoding.temperature);
        read(n, "decoding", "top_p", b.loop.decoding.top_p);
        read(n, "decoding", "max_tokens_per_round", b.loop.decoding.max_tokens_per_round);
        if (b.loop.decoding.max_tokens_per_round < 64)
            throw ManifestError("decoding.max_tokens_per_round", "must be at least 64");
    }
    if (auto n = root["sandbox"]) {
        only_keys(n, "sandbox", {"guest_executable", "data_mount", "root", "timeout_seconds"});
        read(n, "sandbox", "guest_executable", b.python);
        read(n, "sandbox", "data_mount", b.data_mount);
        std::string root_dir;
        read(n, "sandbox", "root", root_dir);
        b.work_root = root_dir;
        double secs = double(b.code_timeout.count()) / 1000.0;
        read_positive(n, "sandbox", "timeout_seconds", secs);
        b.code_timeout = std::chrono::milliseconds(static_cast<long>(secs * 1000));
        if (b.data_mount.empty() || b.data_mount.front() != '/')
            throw ManifestError("sandbox.data_mount", "must be an absolute path");
    }
    if (auto n = root["bench"]) {
        only_keys(n, "bench", {"workers", "task_timeout_seconds", "keep_sandboxes"});
        read_positive(n, "bench", "workers", b.workers);
        long secs = b.task_timeout.count();
        read_positive(n, "bench", "task_timeout_seconds", secs);
        b.task_timeout = std::chrono::seconds(secs);
        read(n, "bench", "keep_sandboxes", b.keep_sandboxes);
    }
    return c;
}

} // namespace sheetagent::bench
