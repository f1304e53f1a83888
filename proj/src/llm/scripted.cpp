#include "sheetagent/llm.hpp"

#include <fstream>
#include <sstream>

namespace sheetagent::llm {

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries, std::string label)
    : entries_(std::move(entries)), label_(std::move(label)), used_(entries_.size(), false)
{
    for (const auto& e : entries_)
        if (e.message.role != Role::Assistant)
            throw ProtocolError(label_ + ": transcript entries must be assistant messages");
}

ScriptedBackend ScriptedBackend::from_json(const Json& j, std::string label)
{
    if (!j.is_array())
        throw ProtocolError(label + ": transcript must be a JSON array");
    std::vector<ScriptEntry> entries;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("message"))
            throw ProtocolError(label + ": every entry needs a message");
        ScriptEntry e;
        if (auto m = item.find("matcher"); m != item.end() && !m->is_null()) {
            if (m->is_string())
                e.matchers.push_back(m->get<std::string>());
            else
                for (const auto& s : *m)
                    e.matchers.push_back(s.get<std::string>());
        }
        if (auto t = item.find("requires_tool"); t != item.end() && !t->is_null())
            e.requires_tool = t->get<std::string>();
        auto msg = item.at("message");
        if (msg.is_string())
            msg = Json{{"role", "assistant"}, {"content", msg}};
        else if (!msg.contains("role"))
            msg["role"] = "assistant";
        e.message = message_from_json(msg);
        entries.push_back(std::move(e));
    }
    return ScriptedBackend(std::move(entries), std::move(label));
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open transcript " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return from_json(Json::parse(ss.str()), path.filename().string());
    } catch (const Json::exception& e) {
        throw ProtocolError(path.string() + ": " + e.what());
    }
}

ChatMessage ScriptedBackend::complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                                      const DecodingParams&)
{
    std::lock_guard lock(mu_);
    Capture cap{messages, {}};
    for (const auto& t : tools)
        cap.tool_names.push_back(t.name);
    captured_.push_back(cap);
    const auto latest = messages.empty() ? std::string() : messages.back().text();
    const auto call_no = calls_++;

    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (used_[i])
            continue;
        const auto& e = entries_[i];
        bool ok = true;
        for (const auto& m : e.matchers)
            ok = ok && latest.find(m) != std::string::npos;
        if (e.requires_tool) {
            bool offered = false;
            for (const auto& n : cap.tool_names)
                offered = offered || n == *e.requires_tool;
            ok = ok && offered;
        }
        if (!ok)
            continue;
        used_[i] = true;
        auto out = e.message;
        for (std::size_t k = 0; k < out.tool_calls.size(); ++k)
            if (out.tool_calls[k].id.empty())
                out.tool_calls[k].id = "call_" + std::to_string(call_no) + "_" + std::to_string(k);
        return out;
    }
    throw TranscriptExhausted(label_ + ": no remaining entry matches call " + std::to_string(call_no + 1) +
                              " (latest message starts with \"" + latest.substr(0, 80) + "\")");
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::clone() const
{
    return std::make_unique<ScriptedBackend>(entries_, label_);
}

std::vector<ScriptedBackend::Capture> ScriptedBackend::captured() const
{
    std::lock_guard lock(mu_);
    return captured_;
}

std::size_t ScriptedBackend::remaining() const
{
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (bool u : used_)
        n += !u;
    return n;
}

} // namespace sheetagent::llm
