#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Lenient element extraction for model output. Model answers embed XML in
// prose and put unescaped '<', '&' inside element text ("x <= 100 && y"), so
// this scans for known tag names instead of parsing a document.
namespace triage::xml {

/// Content of the last <tag>...</tag> in `text`, or nullopt when no opening
/// tag exists. Throws ParseError when the last opening tag is never closed.
std::optional<std::string> last_element(std::string_view text, std::string_view tag);

/// Contents of every top-level <tag>...</tag> in order. Throws ParseError on
/// an unclosed element.
std::vector<std::string> all_elements(std::string_view text, std::string_view tag);

/// Trimmed content of the first <tag> child, or nullopt.
std::optional<std::string> child_text(std::string_view text, std::string_view tag);

bool has_element(std::string_view text, std::string_view tag);

std::string trim(std::string_view text);

}  // namespace triage::xml
