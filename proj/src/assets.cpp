#include "sheetagent/assets.hpp"

namespace sheetagent {

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                if (auto it = values.find(tmpl.substr(i + 1, close - i - 1)); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

} // namespace sheetagent
