#include "triage/xml_extract.hpp"

#include <cctype>

#include "triage/error.hpp"

namespace triage::xml {
namespace {

constexpr auto npos = std::string_view::npos;

bool tag_boundary(char c) { return c == '>' || c == '/' || std::isspace(static_cast<unsigned char>(c)); }

/// Offset of the next "<tag" opening at or after `from`.
size_t find_open(std::string_view text, std::string_view tag, size_t from) {
    while (true) {
        size_t p = text.find('<', from);
        if (p == npos) return npos;
        if (text.substr(p + 1, tag.size()) == tag && p + 1 + tag.size() < text.size() &&
            tag_boundary(text[p + 1 + tag.size()]))
            return p;
        from = p + 1;
    }
}

size_t find_close(std::string_view text, std::string_view tag, size_t from) {
    while (true) {
        size_t p = text.find("</", from);
        if (p == npos) return npos;
        size_t q = p + 2;
        if (text.substr(q, tag.size()) == tag) {
            size_t r = q + tag.size();
            while (r < text.size() && std::isspace(static_cast<unsigned char>(text[r]))) ++r;
            if (r < text.size() && text[r] == '>') return p;
        }
        from = p + 2;
    }
}

struct Span {
    size_t content_begin;
    size_t content_end;
    size_t after;
};

/// Element starting at the opening tag `open`; handles nesting of the same tag.
Span element_at(std::string_view text, std::string_view tag, size_t open) {
    size_t gt = text.find('>', open);
    if (gt == npos) throw ParseError("unterminated <" + std::string(tag) + "> tag");
    if (text[gt - 1] == '/') return {gt + 1, gt + 1, gt + 1};  // <tag/>
    size_t cursor = gt + 1;
    int depth = 1;
    while (true) {
        size_t next_open = find_open(text, tag, cursor);
        size_t next_close = find_close(text, tag, cursor);
        if (next_close == npos) throw ParseError("missing </" + std::string(tag) + "> closing tag");
        if (next_open != npos && next_open < next_close) {
            size_t g = text.find('>', next_open);
            if (g != npos && text[g - 1] != '/') ++depth;
            cursor = (g == npos ? next_open + 1 : g + 1);
            continue;
        }
        if (--depth == 0) {
            size_t end_gt = text.find('>', next_close);
            return {gt + 1, next_close, end_gt + 1};
        }
        cursor = next_close + 2;
    }
}

}  // namespace

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool has_element(std::string_view text, std::string_view tag) { return find_open(text, tag, 0) != npos; }

std::optional<std::string> last_element(std::string_view text, std::string_view tag) {
    size_t last = npos;
    for (size_t p = find_open(text, tag, 0); p != npos; p = find_open(text, tag, p + 1)) last = p;
    if (last == npos) return std::nullopt;
    Span s = element_at(text, tag, last);
    return std::string(text.substr(s.content_begin, s.content_end - s.content_begin));
}

std::vector<std::string> all_elements(std::string_view text, std::string_view tag) {
    std::vector<std::string> out;
    size_t p = find_open(text, tag, 0);
    while (p != npos) {
        Span s = element_at(text, tag, p);
        out.emplace_back(text.substr(s.content_begin, s.content_end - s.content_begin));
        p = find_open(text, tag, s.after);
    }
    return out;
}

std::optional<std::string> child_text(std::string_view text, std::string_view tag) {
    size_t p = find_open(text, tag, 0);
    if (p == npos) return std::nullopt;
    Span s = element_at(text, tag, p);
    return trim(text.substr(s.content_begin, s.content_end - s.content_begin));
}

}  // namespace triage::xml
