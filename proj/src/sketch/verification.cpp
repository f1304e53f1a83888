#include "sheetagent/sketch.hpp"
#include "text.hpp"

#include <yaml-cpp/yaml.h>

namespace sheetagent::sketch {
namespace {

using detail::lower;
using detail::trim;

/// Every fenced block regardless of tag, unterminated ones included.
std::vector<std::string> all_fences(std::string_view text)
{
    std::vector<std::string> out;
    bool inside = false;
    std::string cur;
    for (auto line : detail::split_lines(text)) {
        auto t = trim(line);
        if (t.substr(0, 3) == "```") {
            if (inside && trim(t.substr(3)).empty()) {
                out.push_back(std::move(cur));
                cur.clear();
                inside = false;
            } else if (!inside) {
                inside = true;
                cur.clear();
            }
            continue;
        }
        if (inside)
            cur.append(line).push_back('\n');
    }
    if (inside)
        out.push_back(std::move(cur));
    return out;
}

std::optional<std::string> locate(std::string_view text)
{
    auto fences = all_fences(text);
    for (auto it = fences.rbegin(); it != fences.rend(); ++it)
        if (lower(*it).find("verification") != std::string::npos)
            return *it;

    // Bare document: the last line whose first word is "verification:".
    std::optional<std::size_t> last;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        auto k = line.find_first_not_of(" \t>#*_-");
        if (k != std::string_view::npos && lower(line.substr(k, 12)) == "verification") {
            auto rest = line.substr(k + 12);
            auto c = rest.find_first_not_of("*_ \t");
            if (c != std::string_view::npos && rest[c] == ':')
                last = pos;
        }
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    if (!last)
        return std::nullopt;
    return std::string(text.substr(*last));
}

/// Trailing commas (the prompt's template has them) and markdown emphasis go.
std::string clean(std::string_view doc)
{
    std::string out;
    for (auto line : detail::split_lines(doc)) {
        std::string l(line);
        while (!l.empty() && (detail::is_space(l.back()) || l.back() == ','))
            l.pop_back();
        // "**Verification**:" and "__verification__:" lose their emphasis.
        auto k = l.find_first_not_of(" \t*_");
        if (k != std::string::npos && lower(std::string_view(l).substr(k, 12)) == "verification") {
            auto after = l.find_first_not_of("*_", k + 12);
            l = l.substr(0, l.find_first_not_of(" \t")) + l.substr(k, 12) +
                (after == std::string::npos ? "" : l.substr(after));
        }
        out += l;
        out += '\n';
    }
    return out;
}

std::optional<bool> verdict(std::string_view token)
{
    auto t = lower(trim(token));
    while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '*'))
        t.erase(0, 1);
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '*' || t.back() == '.'))
        t.pop_back();
    if (t == "true" || t == "yes" || t == "pass" || t == "passed" || t == "valid" || t == "correct")
        return true;
    if (t == "false" || t == "no" || t == "fail" || t == "failed" || t == "invalid" || t == "incorrect")
        return false;
    return std::nullopt;
}

std::string unquote(std::string_view s)
{
    s = trim(s);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        s = s.substr(1, s.size() - 2);
    return std::string(s);
}

bool empty_marker(std::string_view s)
{
    auto t = lower(trim(s));
    return t.empty() || t == "[]" || t == "none" || t == "null" || t == "~";
}

std::string flatten(const YAML::Node& n)
{
    if (n.IsScalar())
        return n.Scalar();
    if (n.IsMap() && n.size() == 1)
        return n.begin()->first.Scalar() + ": " + flatten(n.begin()->second);
    YAML::Emitter e;
    e << YAML::Flow << n;
    return e.c_str();
}

bool too_deep(std::string_view s)
{
    int depth = 0;
    for (char c : s) {
        if (c == '[' || c == '{')
            depth++;
        else if ((c == ']' || c == '}') && depth > 0)
            depth--;
        if (depth > 32)
            return true;
    }
    return false;
}

struct Raw
{
    bool verdict;
    std::vector<std::string> issues;
};

std::optional<Raw> via_yaml(const std::string& doc)
{
    if (too_deep(doc))
        return std::nullopt;
    YAML::Node root;
    try {
        root = YAML::Load(doc);
    } catch (const YAML::Exception&) {
        return std::nullopt;
    }
    if (!root.IsMap())
        return std::nullopt;
    YAML::Node v, issues;
    for (const auto& kv : root) {
        if (!kv.first.IsScalar())
            continue;
        auto key = lower(trim(kv.first.Scalar()));
        if (key == "verification")
            v = kv.second;
        else if (key == "issues")
            issues = kv.second;
    }
    if (!v || !v.IsScalar())
        return std::nullopt;
    auto ok = verdict(v.Scalar());
    if (!ok)
        return std::nullopt;
    Raw raw{*ok, {}};
    if (issues && issues.IsSequence()) {
        for (const auto& item : issues) {
            if (item.IsNull())
                continue;
            auto text = flatten(item);
            if (!empty_marker(text))
                raw.issues.push_back(text);
        }
    } else if (issues && issues.IsScalar() && !empty_marker(issues.Scalar())) {
        raw.issues.push_back(issues.Scalar());
    } else if (issues && issues.IsMap()) {
        for (const auto& kv : issues)
            raw.issues.push_back(kv.first.Scalar() + ": " + flatten(kv.second));
    }
    return raw;
}

/// Line-based fallback for documents yaml-cpp rejects (prose after the list, stray colons).
std::optional<Raw> via_lines(const std::string& doc)
{
    std::optional<Raw> raw;
    bool in_issues = false;
    for (auto line : detail::split_lines(doc)) {
        auto t = trim(line);
        auto colon = t.find(':');
        std::string key;
        if (colon != std::string_view::npos) {
            key = lower(t.substr(0, colon));
            auto a = key.find_first_not_of(">#*_ \t");
            auto b = key.find_last_not_of(">#*_ \t");
            key = a == std::string::npos ? std::string() : key.substr(a, b - a + 1);
        }
        if (!raw) {
            if (key == "verification") {
                auto ok = verdict(t.substr(colon + 1));
                if (!ok)
                    return std::nullopt;
                raw = Raw{*ok, {}};
            }
            continue;
        }
        if (!in_issues) {
            if (key == "issues") {
                in_issues = true;
                auto rest = unquote(t.substr(colon + 1));
                if (!empty_marker(rest))
                    raw->issues.push_back(rest);
            }
            continue;
        }
        if (t.size() >= 2 && (t[0] == '-' || t[0] == '*') && detail::is_space(t[1])) {
            auto text = unquote(t.substr(2));
            if (!empty_marker(text))
                raw->issues.push_back(text);
        } else if (!t.empty()) {
            break;
        }
    }
    return raw;
}

VerificationReport parse_impl(std::string_view text)
{
    auto doc = locate(text);
    if (!doc)
        return {false, {std::string(kUnparseableVerification)}};
    auto cleaned = clean(*doc);
    auto raw = via_yaml(cleaned);
    if (!raw)
        raw = via_lines(cleaned);
    if (!raw)
        return {false, {std::string(kUnparseableVerification)}};
    if (raw->verdict && raw->issues.empty())
        return {true, {}};
    if (raw->issues.empty())
        raw->issues.push_back("verification reported false without listing issues");
    return {false, std::move(raw->issues)};
}

} // namespace

VerificationReport parse_verification(std::string_view text)
{
    try {
        return parse_impl(text);
    } catch (...) {
        return {false, {std::string(kUnparseableVerification)}};
    }
}

} // namespace sheetagent::sketch
