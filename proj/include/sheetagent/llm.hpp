#pragma once

#include "sheetagent/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sheetagent::llm {

using Json = nlohmann::json;

class BackendUnavailable : public Error
{
public:
    using Error::Error;
};

class ProtocolError : public Error
{
public:
    using Error::Error;
};

class TranscriptExhausted : public Error
{
public:
    using Error::Error;
};

class UnsatisfiableBudget : public Error
{
public:
    using Error::Error;
};

enum class Role { System, User, Assistant, Tool };

std::string_view to_string(Role r);
/// Throws ProtocolError on an unknown role name.
Role parse_role(std::string_view s);

struct TextPart
{
    std::string text;
    friend bool operator==(const TextPart&, const TextPart&) = default;
};

struct ImagePart
{
    std::string data; // encoded bytes, PNG unless media_type says otherwise
    std::string media_type = "image/png";
    friend bool operator==(const ImagePart&, const ImagePart&) = default;
};

using Part = std::variant<TextPart, ImagePart>;

struct ToolCall
{
    std::string id;
    std::string name;
    Json arguments = Json::object();
    friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ChatMessage
{
    Role role = Role::User;
    std::vector<Part> parts;
    std::vector<ToolCall> tool_calls;      // assistant only
    std::optional<std::string> tool_call_id; // tool only

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text);
    static ChatMessage assistant(std::string text, std::vector<ToolCall> calls = {});
    static ChatMessage tool(std::string call_id, std::vector<Part> parts);

    /// Text parts joined with newlines.
    std::string text() const;
    std::size_t image_count() const;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Archive form: images as base64. Round-trips exactly through message_from_json.
Json message_to_json(const ChatMessage& m);
/// Also accepts the short form {"role":..., "content": "text", "tool_calls": [{name, arguments}]}.
ChatMessage message_from_json(const Json& j);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

struct ToolSpec
{
    std::string name;
    std::string description;
    Json parameters = Json::object();

    /// {"type": "function", "function": {...}}, the chat-completions tool shape.
    Json to_json() const;
    static ToolSpec from_json(const Json& j);
};

struct DecodingParams
{
    double temperature = 0.0;
    double top_p = 1.0;
    std::size_t max_tokens_per_round = 4096;
};

class Backend
{
public:
    virtual ~Backend() = default;
    /// Returns an assistant message. Throws BackendUnavailable, ProtocolError,
    /// TranscriptExhausted.
    virtual ChatMessage complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                                 const DecodingParams& decoding) = 0;
};

// ---- token budgeting

class TokenEstimator
{
public:
    virtual ~TokenEstimator() = default;
    virtual std::size_t estimate(const ChatMessage& m) const = 0;
    /// Characters that cost one token at most; truncation uses it to size cuts.
    virtual std::size_t chars_per_token() const { return 4; }
};

/// ceil(characters / 4) + 256 per image. Tool-call names and arguments count as text.
class CharQuarterEstimator : public TokenEstimator
{
public:
    std::size_t estimate(const ChatMessage& m) const override;
};

inline constexpr std::size_t kTokensPerImage = 256;

std::size_t estimate_tokens(const ChatMessage& m);
std::size_t utf8_length(std::string_view s);

/// Middle-truncates text parts so the estimate fits. Throws UnsatisfiableBudget
/// when images and tool calls alone exceed the budget, std::invalid_argument
/// when budget < 64.
ChatMessage truncate_to_budget(const ChatMessage& m, std::size_t budget_tokens,
                               const TokenEstimator& estimator = CharQuarterEstimator());

// ---- HTTP backend

struct EndpointConfig
{
    std::string base_url; // e.g. "https://host/v1"; "/chat/completions" is appended
    std::string model;
    std::string api_key_env; // name of the variable holding the bearer token; empty for none
    int retries = 3;
    std::chrono::milliseconds backoff{500}; // doubles after every failed attempt
    std::chrono::seconds timeout{300};
};

/// Chat-completions request body for the given conversation.
Json wire_request(const std::string& model, const std::vector<ChatMessage>& messages,
                  const std::vector<ToolSpec>& tools, const DecodingParams& decoding);

/// Maps the first choice of a chat-completions response. Throws ProtocolError.
ChatMessage parse_wire_response(const Json& response);

class HttpBackend : public Backend
{
public:
    explicit HttpBackend(EndpointConfig config);

    ChatMessage complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                         const DecodingParams& decoding) override;

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
};

// ---- scripted replay

struct ScriptEntry
{
    std::vector<std::string> matchers; // all must occur in the latest context message
    std::optional<std::string> requires_tool; // only offered when this tool is available
    ChatMessage message;
};

/// Replays a transcript: each call returns the earliest unconsumed entry
/// whose matchers accept the latest message. Thread-safe, but one cursor
/// serves one loop; clone() for an independent replay.
class ScriptedBackend : public Backend
{
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries, std::string label = "transcript");

    /// JSON array of {matcher?: string|[string], requires_tool?: string, message}.
    static ScriptedBackend from_json(const Json& j, std::string label = "transcript");
    static ScriptedBackend from_file(const std::filesystem::path& path);

    ChatMessage complete(const std::vector<ChatMessage>& messages, const std::vector<ToolSpec>& tools,
                         const DecodingParams& decoding) override;

    std::unique_ptr<ScriptedBackend> clone() const;

    struct Capture
    {
        std::vector<ChatMessage> messages;
        std::vector<std::string> tool_names;
    };
    std::vector<Capture> captured() const;
    std::size_t remaining() const;

private:
    std::vector<ScriptEntry> entries_;
    std::string label_;
    mutable std::mutex mu_;
    std::vector<bool> used_;
    std::vector<Capture> captured_;
    std::size_t calls_ = 0;
};

} // namespace sheetagent::llm
