#include "sheetagent/llm.hpp"

#include <openssl/evp.h>

namespace sheetagent::llm {

std::string_view to_string(Role r)
{
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
    }
    return "user";
}

Role parse_role(std::string_view s)
{
    if (s == "system")
        return Role::System;
    if (s == "user")
        return Role::User;
    if (s == "assistant")
        return Role::Assistant;
    if (s == "tool")
        return Role::Tool;
    throw ProtocolError("unknown message role '" + std::string(s) + "'");
}

ChatMessage ChatMessage::system(std::string text) { return {Role::System, {TextPart{std::move(text)}}, {}, {}}; }
ChatMessage ChatMessage::user(std::string text) { return {Role::User, {TextPart{std::move(text)}}, {}, {}}; }

ChatMessage ChatMessage::assistant(std::string text, std::vector<ToolCall> calls)
{
    ChatMessage m{Role::Assistant, {}, std::move(calls), {}};
    if (!text.empty() || m.tool_calls.empty())
        m.parts.push_back(TextPart{std::move(text)});
    return m;
}

ChatMessage ChatMessage::tool(std::string call_id, std::vector<Part> parts)
{
    return {Role::Tool, std::move(parts), {}, std::move(call_id)};
}

std::string ChatMessage::text() const
{
    std::string out;
    bool first = true;
    for (const auto& p : parts)
        if (const auto* t = std::get_if<TextPart>(&p)) {
            if (!first)
                out += '\n';
            out += t->text;
            first = false;
        }
    return out;
}

std::size_t ChatMessage::image_count() const
{
    std::size_t n = 0;
    for (const auto& p : parts)
        n += std::holds_alternative<ImagePart>(p);
    return n;
}

std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                             reinterpret_cast<const unsigned char*>(bytes.data()), int(bytes.size()));
    out.resize(std::size_t(n));
    return out;
}

std::string base64_decode(std::string_view text)
{
    std::string clean;
    for (char c : text)
        if (c != '\n' && c != '\r' && c != ' ')
            clean.push_back(c);
    if (clean.size() % 4 != 0)
        throw ProtocolError("base64 length is not a multiple of 4");
    std::string out(clean.size() / 4 * 3, '\0');
    auto n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                             reinterpret_cast<const unsigned char*>(clean.data()), int(clean.size()));
    if (n < 0)
        throw ProtocolError("invalid base64");
    // EVP_DecodeBlock keeps the zero bytes standing in for '=' padding.
    std::size_t pad = 0;
    if (!clean.empty() && clean.back() == '=')
        pad = clean.size() >= 2 && clean[clean.size() - 2] == '=' ? 2 : 1;
    out.resize(std::size_t(n) - pad);
    return out;
}

Json message_to_json(const ChatMessage& m)
{
    Json j{{"role", to_string(m.role)}};
    Json content = Json::array();
    for (const auto& p : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&p))
            content.push_back({{"type", "text"}, {"text", t->text}});
        else {
            const auto& img = std::get<ImagePart>(p);
            content.push_back({{"type", "image"}, {"media_type", img.media_type}, {"data", base64_encode(img.data)}});
        }
    }
    j["content"] = std::move(content);
    if (!m.tool_calls.empty()) {
        Json calls = Json::array();
        for (const auto& c : m.tool_calls)
            calls.push_back({{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}});
        j["tool_calls"] = std::move(calls);
    }
    if (m.tool_call_id)
        j["tool_call_id"] = *m.tool_call_id;
    return j;
}

ChatMessage message_from_json(const Json& j)
{
    try {
        ChatMessage m;
        m.role = parse_role(j.value("role", "assistant"));
        if (auto it = j.find("content"); it != j.end() && !it->is_null()) {
            if (it->is_string()) {
                m.parts.push_back(TextPart{it->get<std::string>()});
            } else {
                for (const auto& p : *it) {
                    auto type = p.at("type").get<std::string>();
                    if (type == "text")
                        m.parts.push_back(TextPart{p.at("text").get<std::string>()});
                    else if (type == "image")
                        m.parts.push_back(ImagePart{base64_decode(p.at("data").get<std::string>()),
                                                    p.value("media_type", "image/png")});
                    else
                        throw ProtocolError("unknown content part type '" + type + "'");
                }
            }
        }
        if (auto it = j.find("tool_calls"); it != j.end()) {
            for (const auto& c : *it) {
                ToolCall call{c.value("id", ""), c.at("name").get<std::string>(), Json::object()};
                if (auto a = c.find("arguments"); a != c.end())
                    call.arguments = a->is_string() ? Json::parse(a->get<std::string>()) : *a;
                m.tool_calls.push_back(std::move(call));
            }
        }
        if (auto it = j.find("tool_call_id"); it != j.end())
            m.tool_call_id = it->get<std::string>();
        return m;
    } catch (const Json::exception& e) {
        throw ProtocolError(std::string("malformed message JSON: ") + e.what());
    }
}

Json ToolSpec::to_json() const
{
    return {{"type", "function"},
            {"function", {{"name", name}, {"description", description}, {"parameters", parameters}}}};
}

ToolSpec ToolSpec::from_json(const Json& j)
{
    const auto& f = j.contains("function") ? j.at("function") : j;
    return {f.at("name").get<std::string>(), f.value("description", ""), f.value("parameters", Json::object())};
}

} // namespace sheetagent::llm
