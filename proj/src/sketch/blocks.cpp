#include "sheetagent/sketch.hpp"
#include "text.hpp"

namespace sheetagent::sketch {

std::vector<std::string> extract_yaml_blocks(std::string_view text)
{
    std::vector<std::string> blocks;
    bool inside = false;
    bool keep = false;
    std::string current;
    for (auto line : detail::split_lines(text)) {
        auto t = detail::trim(line);
        if (t.substr(0, 3) != "```") {
            if (inside && keep)
                current.append(line).push_back('\n');
            continue;
        }
        auto info = detail::trim(t.substr(3));
        if (!inside) {
            auto tag = detail::lower(info.substr(0, info.find_first_of(" \t{")));
            inside = true;
            keep = tag == "yaml" || tag == "yml";
            current.clear();
        } else if (info.empty()) {
            if (keep)
                blocks.push_back(std::move(current));
            inside = false;
            current.clear();
        } else if (keep) {
            current.append(line).push_back('\n');
        }
    }
    return blocks;
}

std::string fence(std::string_view yaml)
{
    std::string out = "```yaml\n";
    out += yaml;
    if (!yaml.empty() && yaml.back() != '\n')
        out += '\n';
    out += "```\n";
    return out;
}

} // namespace sheetagent::sketch
