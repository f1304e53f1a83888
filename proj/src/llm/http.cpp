#include <httplib.h>

#include "sheetagent/llm.hpp"

#include <cstdlib>
#include <thread>

namespace sheetagent::llm {
namespace {

Json content_parts(const ChatMessage& m)
{
    // Plain text goes as a string; anything with images as a part list.
    if (m.image_count() == 0)
        return m.text();
    Json parts = Json::array();
    for (const auto& p : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&p))
            parts.push_back({{"type", "text"}, {"text", t->text}});
        else {
            const auto& img = std::get<ImagePart>(p);
            parts.push_back({{"type", "image_url"},
                             {"image_url", {{"url", "data:" + img.media_type + ";base64," + base64_encode(img.data)}}}});
        }
    }
    return parts;
}

struct Target
{
    std::string origin; // scheme://host[:port]
    std::string path;   // ends with /chat/completions
};

Target split_url(const std::string& base)
{
    auto scheme_end = base.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint base_url needs a scheme: " + base);
    auto path_start = base.find('/', scheme_end + 3);
    Target t;
    t.origin = base.substr(0, path_start);
    t.path = path_start == std::string::npos ? "" : base.substr(path_start);
    while (!t.path.empty() && t.path.back() == '/')
        t.path.pop_back();
    t.path += "/chat/completions";
    return t;
}

} // namespace

Json wire_request(const std::string& model, const std::vector<ChatMessage>& messages,
                  const std::vector<ToolSpec>& tools, const DecodingParams& decoding)
{
    Json msgs = Json::array();
    std::vector<const ChatMessage*> pending_images; // tool outputs carrying images
    auto flush = [&] {
        // Tool messages cannot carry images on the wire, so they follow as a user turn.
        if (pending_images.empty())
            return;
        ChatMessage carrier{Role::User, {}, {}, {}};
        for (const auto* m : pending_images) {
            carrier.parts.push_back(TextPart{"Image output of tool call " + m->tool_call_id.value_or("") + ":"});
            for (const auto& p : m->parts)
                if (std::holds_alternative<ImagePart>(p))
                    carrier.parts.push_back(p);
        }
        msgs.push_back({{"role", "user"}, {"content", content_parts(carrier)}});
        pending_images.clear();
    };

    for (const auto& m : messages) {
        if (m.role != Role::Tool)
            flush();
        Json j{{"role", to_string(m.role)}};
        switch (m.role) {
        case Role::System:
        case Role::User: j["content"] = content_parts(m); break;
        case Role::Assistant: {
            auto text = m.text();
            j["content"] = text.empty() && !m.tool_calls.empty() ? Json(nullptr) : Json(text);
            if (!m.tool_calls.empty()) {
                Json calls = Json::array();
                for (const auto& c : m.tool_calls)
                    calls.push_back({{"id", c.id},
                                     {"type", "function"},
                                     {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
                j["tool_calls"] = std::move(calls);
            }
            break;
        }
        case Role::Tool:
            j["tool_call_id"] = m.tool_call_id.value_or("");
            j["content"] = m.text();
            if (m.image_count())
                pending_images.push_back(&m);
            break;
        }
        msgs.push_back(std::move(j));
    }
    flush();

    Json body{{"model", model}, {"messages", std::move(msgs)}, {"temperature", decoding.temperature},
              {"top_p", decoding.top_p}};
    if (!tools.empty()) {
        Json specs = Json::array();
        for (const auto& t : tools)
            specs.push_back(t.to_json());
        body["tools"] = std::move(specs);
        body["tool_choice"] = "auto";
    }
    return body;
}

ChatMessage parse_wire_response(const Json& response)
{
    try {
        const auto& choices = response.at("choices");
        if (!choices.is_array() || choices.empty())
            throw ProtocolError("response has no choices");
        const auto& msg = choices.at(0).at("message");
        if (msg.contains("role") && msg.at("role") != "assistant")
            throw ProtocolError("response message role is not assistant");
        ChatMessage out{Role::Assistant, {}, {}, {}};
        if (auto c = msg.find("content"); c != msg.end() && !c->is_null()) {
            if (c->is_string()) {
                out.parts.push_back(TextPart{c->get<std::string>()});
            } else {
                for (const auto& p : *c)
                    if (p.value("type", "") == "text")
                        out.parts.push_back(TextPart{p.at("text").get<std::string>()});
            }
        }
        if (auto calls = msg.find("tool_calls"); calls != msg.end() && !calls->is_null()) {
            for (const auto& c : *calls) {
                const auto& f = c.at("function");
                ToolCall call{c.value("id", ""), f.at("name").get<std::string>(), Json::object()};
                const auto& args = f.at("arguments");
                try {
                    call.arguments = args.is_string() ? Json::parse(args.get<std::string>()) : args;
                } catch (const Json::parse_error& e) {
                    throw ProtocolError("tool call '" + call.name + "' has arguments that are not JSON: " + e.what());
                }
                out.tool_calls.push_back(std::move(call));
            }
        }
        if (out.parts.empty() && out.tool_calls.empty())
            out.parts.push_back(TextPart{""});
        return out;
    } catch (const Json::exception& e) {
        throw ProtocolError(std::string("malformed chat-completions response: ") + e.what());
    }
}

HttpBackend::HttpBackend(EndpointConfig config) : config_(std::move(config))
{
    split_url(config_.base_url); // validate early
}

ChatMessage HttpBackend::complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                                  const DecodingParams& decoding)
{
    const auto target = split_url(config_.base_url);
    const auto body = wire_request(config_.model, messages, tools, decoding).dump();

    httplib::Client cli(target.origin);
    cli.set_connection_timeout(std::chrono::seconds(30));
    cli.set_read_timeout(config_.timeout);
    cli.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key_env.empty())
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);

    const int attempts = std::max(0, config_.retries) + 1;
    auto delay = config_.backoff;
    std::string last_failure;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        auto res = cli.Post(target.path, headers, body, "application/json");
        if (!res) {
            last_failure = "connection error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300)
            throw ProtocolError("HTTP " + std::to_string(res->status) + " from " + config_.base_url + ": " +
                                res->body.substr(0, 500));
        Json parsed;
        try {
            parsed = Json::parse(res->body);
        } catch (const Json::parse_error& e) {
            throw ProtocolError(std::string("response body is not JSON: ") + e.what());
        }
        return parse_wire_response(parsed);
    }
    throw BackendUnavailable(config_.base_url + " unavailable after " + std::to_string(attempts) +
                             " attempts (" + last_failure + ")");
}

} // namespace sheetagent::llm
