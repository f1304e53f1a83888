#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sheetagent::xml {

/// Element tree with namespace prefixes stripped from element and attribute
/// names. `begin`/`end` are byte offsets of the element's markup in the
/// source document, end exclusive.
struct Element
{
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    std::vector<std::unique_ptr<Element>> children;
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t start_tag_end = 0;

    const std::string* attr(std::string_view key) const;
    std::string attr_or(std::string_view key, std::string fallback = {}) const;
    const Element* child(std::string_view child_name) const;
    std::vector<const Element*> children_named(std::string_view child_name) const;

    /// Concatenated text of this element and all descendants named `t`
    /// (rich-text runs), skipping phonetic runs.
    std::string run_text() const;
};

/// Throws MalformedXml(part, detail).
std::unique_ptr<Element> parse(std::string_view document, const std::string& part);

std::string escape(std::string_view text);

} // namespace sheetagent::xml
