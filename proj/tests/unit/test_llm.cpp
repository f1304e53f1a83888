#include <httplib.h>

#include "sheetagent/llm.hpp"

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

using namespace sheetagent;
using namespace sheetagent::llm;

namespace {

/// Local chat-completions stub; the handler decides each response.
class StubServer
{
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit StubServer(Handler h)
    {
        server_.Post("/v1/chat/completions", [this, h](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            {
                std::lock_guard lock(mu_);
                last_body = req.body;
                last_auth = req.get_header_value("Authorization");
            }
            h(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer()
    {
        server_.stop();
        thread_.join();
    }

    std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<int> hits{0};
    std::mutex mu_;
    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string ok_response(const std::string& content)
{
    return Json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

EndpointConfig fast(const std::string& base, int retries)
{
    EndpointConfig c;
    c.base_url = base;
    c.model = "text-model";
    c.retries = retries;
    c.backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    return c;
}

std::string random_utf8(std::mt19937& rng, std::size_t n)
{
    static const std::vector<std::string> atoms = {"a", "b", " ", "\n", "\xC3\xA9", "\xE2\x82\xAC", "\xF0\x9F\x98\x80"};
    std::string s;
    for (std::size_t i = 0; i < n; ++i)
        s += atoms[std::uniform_int_distribution<std::size_t>(0, atoms.size() - 1)(rng)];
    return s;
}

} // namespace

TEST_CASE("base64 against RFC 4648 vectors")
{
    const std::pair<std::string, std::string> vectors[] = {{"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},
                                                            {"foo", "Zm9v"}, {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="},
                                                            {"foobar", "Zm9vYmFy"}};
    for (const auto& [plain, enc] : vectors) {
        CHECK(base64_encode(plain) == enc);
        CHECK(base64_decode(enc) == plain);
    }
    std::mt19937 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::string bytes(std::uniform_int_distribution<int>(0, 300)(rng), '\0');
        for (auto& b : bytes)
            b = char(rng());
        CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK_THROWS_AS(base64_decode("abc"), ProtocolError);
}

TEST_CASE("message JSON round trip")
{
    ChatMessage tool = ChatMessage::tool("call_1", {TextPart{"out"}, ImagePart{std::string("\x89PNG\0x", 6)}});
    CHECK(message_from_json(message_to_json(tool)) == tool);

    auto a = ChatMessage::assistant("", {{"c1", "execute_python", Json{{"code", "print(1)"}}}});
    auto back = message_from_json(message_to_json(a));
    CHECK(back == a);
    CHECK(back.parts.empty());

    auto shorthand = message_from_json(Json::parse(
        R"({"role":"assistant","content":"hi","tool_calls":[{"name":"f","arguments":"{\"x\": 1}"}]})"));
    CHECK(shorthand.text() == "hi");
    CHECK(shorthand.tool_calls.at(0).arguments == Json{{"x", 1}});
    CHECK_THROWS_AS(message_from_json(Json{{"role", "wizard"}}), ProtocolError);
}

TEST_CASE("scripted backend")
{
    auto plain = ScriptedBackend::from_json(Json::parse(R"js([{"message": "done"}])js"));
    auto reply = plain.complete({ChatMessage::user("go")}, {}, {});
    CHECK(reply.role == Role::Assistant);
    CHECK(reply.text() == "done");
    CHECK_THROWS_AS(plain.complete({ChatMessage::user("again")}, {}, {}), TranscriptExhausted);

    auto script = Json::parse(R"js([
        {"message": {"content": "", "tool_calls": [{"name": "execute_python", "arguments": {"code": "print(1)"}}]}},
        {"matcher": "Verification issues", "message": "fixing"},
        {"matcher": ["1", "tool"], "requires_tool": "execute_python", "message": "saw tool output"},
        {"message": "fallback"}
    ])js");
    auto b = ScriptedBackend::from_json(script);
    std::vector<ToolSpec> tools = {{"execute_python", "", Json::object()}};
    auto first = b.complete({ChatMessage::user("start")}, tools, {});
    REQUIRE(first.tool_calls.size() == 1);
    CHECK(first.tool_calls[0].name == "execute_python");
    CHECK(first.tool_calls[0].arguments == Json{{"code", "print(1)"}});
    CHECK(first.tool_calls[0].id == "call_0_0");

    // Entry 2 waits for its matcher; entry 3 needs the tool offered.
    std::vector<ChatMessage> ctx = {ChatMessage::user("start"), first,
                                    ChatMessage::tool("call_0_0", {TextPart{"1 from tool"}})};
    CHECK(b.complete(ctx, {}, {}).text() == "fallback");
    CHECK(b.complete(ctx, tools, {}).text() == "saw tool output");
    CHECK(b.remaining() == 1);
    CHECK(b.complete({ChatMessage::user("Verification issues to fix:\n- x")}, {}, {}).text() == "fixing");

    auto caps = b.captured();
    REQUIRE(caps.size() == 4);
    CHECK(caps[2].tool_names == std::vector<std::string>{"execute_python"});
    CHECK(caps[1].messages.back().text() == "1 from tool");

    // A clone replays from the start, independent of the original.
    auto c = b.clone();
    CHECK(c->remaining() == 4);
    CHECK(c->captured().empty());
    CHECK(c->complete({ChatMessage::user("start")}, tools, {}).tool_calls.size() == 1);
}

TEST_CASE("scripted replay is deterministic")
{
    auto script = Json::parse(R"js([
        {"message": {"tool_calls": [{"name": "a", "arguments": {}}, {"name": "b", "arguments": {"k": [1,2]}}]}},
        {"matcher": "r", "message": "end"}
    ])js");
    auto run = [&] {
        auto b = ScriptedBackend::from_json(script);
        std::vector<ChatMessage> ctx = {ChatMessage::system("s"), ChatMessage::user("u")};
        ctx.push_back(b.complete(ctx, {}, {}));
        ctx.push_back(ChatMessage::tool("x", {TextPart{"r"}}));
        ctx.push_back(b.complete(ctx, {}, {}));
        Json all = Json::array();
        for (const auto& m : ctx)
            all.push_back(message_to_json(m));
        return all.dump();
    };
    CHECK(run() == run());
}

TEST_CASE("token estimate")
{
    CHECK(estimate_tokens(ChatMessage::user("")) == 0);
    CHECK(estimate_tokens(ChatMessage::user(std::string(400, 'x'))) == 100);
    CHECK(estimate_tokens(ChatMessage::user(std::string(401, 'x'))) == 101);
    ChatMessage img{Role::User, {ImagePart{"png"}, TextPart{"12345678"}}, {}, {}};
    CHECK(estimate_tokens(img) == 258);
    // Code points, not bytes.
    CHECK(estimate_tokens(ChatMessage::user("\xE2\x82\xAC\xE2\x82\xAC\xE2\x82\xAC\xE2\x82\xAC")) == 1);
}

TEST_CASE("truncate_to_budget")
{
    auto small = ChatMessage::user("short");
    CHECK(truncate_to_budget(small, 4096) == small);

    std::string big;
    for (int i = 0; i < 40000; ++i)
        big.push_back(char('a' + i % 26));
    auto out = truncate_to_budget(ChatMessage::tool("t", {TextPart{big}}), 1024);
    CHECK(estimate_tokens(out) <= 1024);
    auto text = out.text();
    CHECK(text.find("\xE2\x80\xA6[truncated ") != std::string::npos);
    CHECK(text.substr(0, 100) == big.substr(0, 100));
    CHECK(text.substr(text.size() - 100) == big.substr(big.size() - 100));
    CHECK(out.tool_call_id == "t");

    ChatMessage with_image{Role::User, {ImagePart{"png"}, TextPart{"caption"}}, {}, {}};
    CHECK_THROWS_AS(truncate_to_budget(with_image, 64), UnsatisfiableBudget);
    CHECK_THROWS_AS(truncate_to_budget(small, 63), std::invalid_argument);

    // Re-estimate oracle over random multi-part messages and budgets.
    std::mt19937 rng(11);
    for (int i = 0; i < 300; ++i) {
        ChatMessage m{Role::Tool, {}, {}, "id"};
        int parts = std::uniform_int_distribution<int>(1, 4)(rng);
        for (int p = 0; p < parts; ++p)
            m.parts.push_back(TextPart{random_utf8(rng, std::uniform_int_distribution<std::size_t>(0, 5000)(rng))});
        if (std::uniform_int_distribution<int>(0, 3)(rng) == 0)
            m.parts.push_back(ImagePart{"x"});
        auto budget = std::uniform_int_distribution<std::size_t>(64, 2000)(rng);
        try {
            auto t = truncate_to_budget(m, budget);
            CHECK(estimate_tokens(t) <= budget);
            CHECK(t.parts.size() == m.parts.size());
            CHECK(t.image_count() == m.image_count());
        } catch (const UnsatisfiableBudget&) {
            CHECK(m.image_count() * kTokensPerImage > budget - 8 * parts);
        }
    }
}

TEST_CASE("wire request shape")
{
    auto specs = std::vector<ToolSpec>{{"convert_excel_to_image", "d", Json{{"type", "object"}}}};
    std::vector<ChatMessage> msgs = {
        ChatMessage::system("sys"),
        ChatMessage::user("hello"),
        ChatMessage::assistant("", {{"c1", "convert_excel_to_image", Json{{"range", "A1"}}}}),
        ChatMessage::tool("c1", {TextPart{"rendered"}, ImagePart{"PNGDATA"}}),
    };
    auto body = wire_request("m", msgs, specs, DecodingParams{});
    CHECK(body["model"] == "m");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["top_p"] == 1.0);
    CHECK(body["tool_choice"] == "auto");
    CHECK(body["tools"][0]["function"]["name"] == "convert_excel_to_image");
    const auto& wm = body["messages"];
    REQUIRE(wm.size() == 5);
    CHECK(wm[1]["content"] == "hello");
    CHECK(wm[2]["content"].is_null());
    CHECK(wm[2]["tool_calls"][0]["function"]["arguments"] == R"({"range":"A1"})");
    CHECK(wm[3]["role"] == "tool");
    CHECK(wm[3]["tool_call_id"] == "c1");
    CHECK(wm[3]["content"] == "rendered");
    CHECK(wm[4]["role"] == "user");
    CHECK(wm[4]["content"][1]["image_url"]["url"] == "data:image/png;base64," + base64_encode("PNGDATA"));

    CHECK_FALSE(wire_request("m", {ChatMessage::user("x")}, {}, {}).contains("tools"));
}

TEST_CASE("parse_wire_response")
{
    auto r = parse_wire_response(Json::parse(R"({"choices":[{"message":{"role":"assistant","content":null,
        "tool_calls":[{"id":"a","type":"function","function":{"name":"execute_python","arguments":"{\"code\":\"1\"}"}}]}}]})"));
    REQUIRE(r.tool_calls.size() == 1);
    CHECK(r.tool_calls[0].arguments["code"] == "1");
    CHECK_THROWS_AS(parse_wire_response(Json::parse(R"({"choices":[]})")), ProtocolError);
    CHECK_THROWS_AS(parse_wire_response(Json::parse(R"({"nope":1})")), ProtocolError);
    CHECK_THROWS_AS(parse_wire_response(Json::parse(R"({"choices":[{"message":{"tool_calls":[
        {"id":"a","function":{"name":"f","arguments":"{broken"}}]}}]})")),
                    ProtocolError);
}

TEST_CASE("http backend against a stub server")
{
    SUBCASE("success carries auth and decoding")
    {
        StubServer s([](const auto&, auto& res) { res.set_content(ok_response("hi"), "application/json"); });
        ::setenv("SHEETAGENT_TEST_KEY", "secret", 1);
        auto cfg = fast(s.base(), 2);
        cfg.api_key_env = "SHEETAGENT_TEST_KEY";
        HttpBackend b(cfg);
        CHECK(b.complete({ChatMessage::user("x")}, {}, {}).text() == "hi");
        CHECK(s.hits == 1);
        std::lock_guard lock(s.mu_);
        CHECK(s.last_auth == "Bearer secret");
        auto body = Json::parse(s.last_body);
        CHECK(body["temperature"] == 0.0);
        CHECK(body["top_p"] == 1.0);
    }
    SUBCASE("5xx exhausts exactly retries + 1 attempts")
    {
        StubServer s([](const auto&, auto& res) { res.status = 503; });
        HttpBackend b(fast(s.base(), 2));
        CHECK_THROWS_AS(b.complete({ChatMessage::user("x")}, {}, {}), BackendUnavailable);
        CHECK(s.hits == 3);
    }
    SUBCASE("429 then success")
    {
        std::atomic<int> n{0};
        StubServer s([&](const auto&, auto& res) {
            if (n++ == 0)
                res.status = 429;
            else
                res.set_content(ok_response("later"), "application/json");
        });
        HttpBackend b(fast(s.base(), 3));
        CHECK(b.complete({ChatMessage::user("x")}, {}, {}).text() == "later");
        CHECK(s.hits == 2);
    }
    SUBCASE("4xx is a protocol error without retry")
    {
        StubServer s([](const auto&, auto& res) {
            res.status = 400;
            res.set_content("bad request", "text/plain");
        });
        HttpBackend b(fast(s.base(), 3));
        CHECK_THROWS_AS(b.complete({ChatMessage::user("x")}, {}, {}), ProtocolError);
        CHECK(s.hits == 1);
    }
    SUBCASE("garbage body")
    {
        StubServer s([](const auto&, auto& res) { res.set_content("<html>", "text/html"); });
        HttpBackend b(fast(s.base(), 0));
        CHECK_THROWS_AS(b.complete({ChatMessage::user("x")}, {}, {}), ProtocolError);
    }
    SUBCASE("nothing listening")
    {
        int port;
        {
            httplib::Server probe;
            port = probe.bind_to_any_port("127.0.0.1");
        }
        HttpBackend b(fast("http://127.0.0.1:" + std::to_string(port) + "/v1", 1));
        CHECK_THROWS_AS(b.complete({ChatMessage::user("x")}, {}, {}), BackendUnavailable);
    }
}
