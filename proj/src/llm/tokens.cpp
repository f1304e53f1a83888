#include "sheetagent/llm.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sheetagent::llm {
namespace {

std::string marker(std::size_t removed) { return "\xE2\x80\xA6[truncated " + std::to_string(removed) + " chars]\xE2\x80\xA6"; }

/// Byte offset of the n-th code point (or size when n is past the end).
std::size_t byte_offset(std::string_view s, std::size_t n)
{
    std::size_t i = 0;
    for (; i < s.size(); ++i)
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
            if (n == 0)
                return i;
            --n;
        }
    return s.size();
}

/// Keeps the first and last code points of s, dropping `removed` from the middle.
std::string cut_middle(const std::string& s, std::size_t removed)
{
    const auto len = utf8_length(s);
    const auto keep = len - removed;
    const auto tail = keep / 2;
    const auto head = keep - tail;
    return s.substr(0, byte_offset(s, head)) + marker(removed) + s.substr(byte_offset(s, len - tail));
}

/// Shrinks the longest text parts first until `excess` code points are gone.
bool shrink(ChatMessage& m, std::size_t excess)
{
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < m.parts.size(); ++i)
        if (std::holds_alternative<TextPart>(m.parts[i]))
            order.push_back(i);
    auto len = [&](std::size_t i) { return utf8_length(std::get<TextPart>(m.parts[i]).text); };
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return len(a) > len(b); });

    for (auto i : order) {
        if (excess == 0)
            break;
        auto& text = std::get<TextPart>(m.parts[i]).text;
        const auto l = utf8_length(text);
        auto n = std::min(l, excess + utf8_length(marker(l)));
        const auto cost = utf8_length(marker(n));
        if (n <= cost)
            continue;
        text = cut_middle(text, n);
        excess -= std::min(excess, n - cost);
    }
    return excess == 0;
}

} // namespace

std::size_t utf8_length(std::string_view s)
{
    std::size_t n = 0;
    for (char c : s)
        n += (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    return n;
}

std::size_t CharQuarterEstimator::estimate(const ChatMessage& m) const
{
    std::size_t chars = 0, images = 0;
    for (const auto& p : m.parts) {
        if (const auto* t = std::get_if<TextPart>(&p))
            chars += utf8_length(t->text);
        else
            ++images;
    }
    for (const auto& c : m.tool_calls)
        chars += utf8_length(c.name) + utf8_length(c.arguments.dump());
    return (chars + 3) / 4 + images * kTokensPerImage;
}

std::size_t estimate_tokens(const ChatMessage& m) { return CharQuarterEstimator().estimate(m); }

ChatMessage truncate_to_budget(const ChatMessage& m, std::size_t budget_tokens, const TokenEstimator& estimator)
{
    if (budget_tokens < 64)
        throw std::invalid_argument("token budget must be at least 64");
    if (estimator.estimate(m) <= budget_tokens)
        return m;

    auto bare = m;
    for (auto& p : bare.parts)
        if (auto* t = std::get_if<TextPart>(&p))
            t->text.clear();
    const auto fixed = estimator.estimate(bare);
    if (fixed > budget_tokens)
        throw UnsatisfiableBudget("message needs " + std::to_string(fixed) +
                                  " tokens for images and tool calls alone; budget is " +
                                  std::to_string(budget_tokens));

    std::size_t total = 0;
    for (const auto& p : m.parts)
        if (const auto* t = std::get_if<TextPart>(&p))
            total += utf8_length(t->text);
    const auto cpt = estimator.chars_per_token();
    std::size_t allowed = (budget_tokens - fixed) * cpt;
    // Estimators may round differently from chars/cpt; tighten until it fits.
    for (int attempt = 0; attempt < 16; ++attempt) {
        auto out = m;
        if (allowed < total && shrink(out, total - allowed) && estimator.estimate(out) <= budget_tokens)
            return out;
        if (allowed == 0)
            break;
        const auto est = estimator.estimate(out);
        const auto over = est > budget_tokens ? (est - budget_tokens) * cpt : cpt;
        allowed -= std::min(allowed, over);
    }
    throw UnsatisfiableBudget("cannot fit text into " + std::to_string(budget_tokens) + " tokens");
}

} // namespace sheetagent::llm
