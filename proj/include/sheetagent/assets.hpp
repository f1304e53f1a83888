#pragma once

#include <map>
#include <string>
#include <string_view>

namespace sheetagent {

/// Files under assets/, compiled in. `name` is relative, e.g. "prompts/extraction.txt".
/// Throws std::out_of_range for unknown names.
std::string_view asset(std::string_view name);

/// Replaces `{key}` slots in one pass; substituted text is never rescanned.
/// Braces around unknown keys are left as they are.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

} // namespace sheetagent
