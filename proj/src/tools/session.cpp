#include "sheetagent/assets.hpp"
#include "sheetagent/tools.hpp"

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace sheetagent::tools {
namespace {

std::string next_session_id()
{
    static std::atomic<unsigned> counter{0};
    return "s" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
}

std::string seconds_text(std::chrono::milliseconds ms)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", double(ms.count()) / 1000.0);
    return buf;
}

std::string describe_status(int status)
{
    if (WIFEXITED(status))
        return "exit status " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status))
        return std::string("signal ") + strsignal(WTERMSIG(status));
    return "unknown status";
}

bool send_all(int fd, std::string_view data)
{
    while (!data.empty()) {
        auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            return false;
        }
        data.remove_prefix(std::size_t(n));
    }
    return true;
}

} // namespace

std::filesystem::path PathMap::to_host(const std::string& path) const
{
    auto root = virtual_root;
    while (root.size() > 1 && root.back() == '/')
        root.pop_back();
    if (path == root)
        return host_root;
    if (path.size() > root.size() && path.compare(0, root.size(), root) == 0 && path[root.size()] == '/')
        return host_root / path.substr(root.size() + 1);
    return path;
}

std::string PathMap::to_virtual(const std::filesystem::path& host) const
{
    auto rel = host.lexically_normal().lexically_relative(host_root.lexically_normal());
    if (rel.empty() || *rel.begin() == "..")
        return host.string();
    auto root = virtual_root;
    while (root.size() > 1 && root.back() == '/')
        root.pop_back();
    return rel == "." ? root : root + "/" + rel.generic_string();
}

llm::ChatMessage ToolResult::to_message() const { return llm::ChatMessage::tool(tool_call_id, parts); }

CodeSession::CodeSession(SessionOptions options) : options_(std::move(options)), id_(next_session_id())
{
    if (options_.sandbox_root.empty())
        throw std::invalid_argument("CodeSession needs a sandbox root");
    std::filesystem::create_directories(options_.sandbox_root);
    options_.sandbox_root = std::filesystem::canonical(options_.sandbox_root);
}

CodeSession::~CodeSession() { stop(); }

void CodeSession::spawn()
{
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
        throw IoError(std::string("socketpair: ") + std::strerror(errno));

    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_addopen(&fa, 1, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_addopen(&fa, 2, "/dev/null", O_WRONLY, 0);
    posix_spawn_file_actions_adddup2(&fa, sv[1], 3);
    posix_spawn_file_actions_adddup2(&fa, sv[1], 4);

    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGDEF | POSIX_SPAWN_SETSIGMASK);
    posix_spawnattr_setpgroup(&attr, 0);
    sigset_t all, none;
    sigfillset(&all);
    sigemptyset(&none);
    posix_spawnattr_setsigdefault(&attr, &all);
    posix_spawnattr_setsigmask(&attr, &none);

    const std::string source(asset("guest/repl.py"));
    const std::string root = options_.sandbox_root.string();
    std::vector<std::string> args = {options_.python, "-I", "-B", "-c", source, root, options_.virtual_root};
    // Scrubbed environment: no proxies that work, temp files inside the sandbox.
    std::vector<std::string> env = {
        "PATH=/usr/local/bin:/usr/bin:/bin",
        "HOME=" + root,
        "TMPDIR=" + root + "/.tmp",
        "LANG=C.UTF-8",
        "MPLBACKEND=Agg",
        "http_proxy=http://127.0.0.1:9",
        "https_proxy=http://127.0.0.1:9",
        "HTTP_PROXY=http://127.0.0.1:9",
        "HTTPS_PROXY=http://127.0.0.1:9",
        "no_proxy=",
    };
    std::vector<char*> argv, envp;
    for (auto& a : args)
        argv.push_back(a.data());
    argv.push_back(nullptr);
    for (auto& e : env)
        envp.push_back(e.data());
    envp.push_back(nullptr);

    pid_t pid = -1;
    int rc = ::posix_spawnp(&pid, options_.python.c_str(), &fa, &attr, argv.data(), envp.data());
    posix_spawn_file_actions_destroy(&fa);
    posix_spawnattr_destroy(&attr);
    ::close(sv[1]);
    if (rc != 0) {
        ::close(sv[0]);
        throw IoError("cannot start " + options_.python + ": " + std::strerror(rc));
    }
    pid_ = pid;
    fd_ = sv[0];
    pending_.clear();
}

void CodeSession::stop()
{
    if (pid_ > 0) {
        ::kill(-pid_, SIGKILL);
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
        }
    }
    if (fd_ >= 0)
        ::close(fd_);
    pid_ = -1;
    fd_ = -1;
    pending_.clear();
}

ToolResult CodeSession::execute(const std::string& code, const std::string& call_id)
{
    std::lock_guard lock(mu_);
    auto fail = [&](std::string text) { return ToolResult{call_id, {llm::TextPart{std::move(text)}}, true}; };
    try {
        if (pid_ < 0)
            spawn();
    } catch (const std::exception& e) {
        return fail(std::string("python is unavailable: ") + e.what());
    }

    if (!send_all(fd_, llm::Json{{"code", code}}.dump() + "\n")) {
        stop();
        return fail("python session ended unexpectedly; it will restart on the next call");
    }

    const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
    while (true) {
        if (auto nl = pending_.find('\n'); nl != std::string::npos) {
            auto line = pending_.substr(0, nl);
            pending_.erase(0, nl + 1);
            try {
                auto j = llm::Json::parse(line);
                auto output = j.value("output", "");
                // notebook display drops the final newline of a cell's output
                while (!output.empty() && output.back() == '\n')
                    output.pop_back();
                return ToolResult{call_id, {llm::TextPart{std::move(output)}}, j.value("error", false)};
            } catch (const llm::Json::exception&) {
                stop();
                return fail("python session sent an unreadable reply and was restarted");
            }
        }
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            stop();
            return fail("Execution timed out after " + seconds_text(options_.timeout) +
                        " seconds. The python session was restarted; variables from earlier calls are gone.");
        }
        pollfd p{fd_, POLLIN, 0};
        int r = ::poll(&p, 1, int(std::min<long long>(left.count(), 1000)));
        if (r < 0 && errno != EINTR) {
            stop();
            return fail(std::string("poll failed: ") + std::strerror(errno));
        }
        if (r <= 0)
            continue;
        char buf[65536];
        auto n = ::read(fd_, buf, sizeof buf);
        if (n > 0) {
            pending_.append(buf, std::size_t(n));
            continue;
        }
        if (n < 0 && errno == EINTR)
            continue;
        // EOF: the guest died mid-call.
        int status = 0;
        ::waitpid(pid_, &status, 0);
        ::kill(-pid_, SIGKILL);
        pid_ = -1;
        ::close(fd_);
        fd_ = -1;
        return fail("python session crashed (" + describe_status(status) +
                    "); it will restart on the next call with fresh state");
    }
}

} // namespace sheetagent::tools
