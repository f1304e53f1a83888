#include "xml_dom.hpp"

#include "sheetagent/error.hpp"

#include <expat.h>

namespace sheetagent::xml {
namespace {

std::string local_name(const char* qualified)
{
    std::string_view q(qualified);
    auto colon = q.rfind(':');
    return std::string(colon == std::string_view::npos ? q : q.substr(colon + 1));
}

struct Builder
{
    XML_Parser parser = nullptr;
    std::unique_ptr<Element> root;
    std::vector<Element*> stack;

    static void on_start(void* self, const XML_Char* name, const XML_Char** attrs)
    {
        auto& b = *static_cast<Builder*>(self);
        auto el = std::make_unique<Element>();
        el->name = local_name(name);
        for (int i = 0; attrs[i]; i += 2)
            el->attrs.emplace_back(local_name(attrs[i]), attrs[i + 1]);
        el->begin = static_cast<std::size_t>(XML_GetCurrentByteIndex(b.parser));
        el->start_tag_end = el->begin + static_cast<std::size_t>(XML_GetCurrentByteCount(b.parser));
        auto* raw = el.get();
        if (b.stack.empty())
            b.root = std::move(el);
        else
            b.stack.back()->children.push_back(std::move(el));
        b.stack.push_back(raw);
    }

    static void on_end(void* self, const XML_Char*)
    {
        auto& b = *static_cast<Builder*>(self);
        auto* el = b.stack.back();
        auto count = XML_GetCurrentByteCount(b.parser);
        if (count == 0) // empty-element tag: the start tag was the whole element
            el->end = el->start_tag_end;
        else
            el->end = static_cast<std::size_t>(XML_GetCurrentByteIndex(b.parser)) + static_cast<std::size_t>(count);
        b.stack.pop_back();
    }

    static void on_text(void* self, const XML_Char* s, int len)
    {
        auto& b = *static_cast<Builder*>(self);
        if (!b.stack.empty())
            b.stack.back()->text.append(s, static_cast<std::size_t>(len));
    }
};

} // namespace

const std::string* Element::attr(std::string_view key) const
{
    for (const auto& [k, v] : attrs)
        if (k == key)
            return &v;
    return nullptr;
}

std::string Element::attr_or(std::string_view key, std::string fallback) const
{
    const auto* v = attr(key);
    return v ? *v : std::move(fallback);
}

const Element* Element::child(std::string_view child_name) const
{
    for (const auto& c : children)
        if (c->name == child_name)
            return c.get();
    return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view child_name) const
{
    std::vector<const Element*> out;
    for (const auto& c : children)
        if (c->name == child_name)
            out.push_back(c.get());
    return out;
}

std::string Element::run_text() const
{
    if (name == "t")
        return text;
    std::string out;
    for (const auto& c : children) {
        if (c->name == "rPh")
            continue;
        out += c->run_text();
    }
    return out;
}

std::unique_ptr<Element> parse(std::string_view document, const std::string& part)
{
    Builder b;
    b.parser = XML_ParserCreate(nullptr);
    if (!b.parser)
        throw MalformedXml(part, "cannot allocate XML parser");
    XML_SetUserData(b.parser, &b);
    XML_SetElementHandler(b.parser, &Builder::on_start, &Builder::on_end);
    XML_SetCharacterDataHandler(b.parser, &Builder::on_text);

    auto status = XML_Parse(b.parser, document.data(), static_cast<int>(document.size()), XML_TRUE);
    if (status != XML_STATUS_OK) {
        std::string detail = XML_ErrorString(XML_GetErrorCode(b.parser));
        detail += " at line " + std::to_string(XML_GetCurrentLineNumber(b.parser));
        XML_ParserFree(b.parser);
        throw MalformedXml(part, detail);
    }
    XML_ParserFree(b.parser);
    if (!b.root)
        throw MalformedXml(part, "empty document");
    return std::move(b.root);
}

std::string escape(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

} // namespace sheetagent::xml
