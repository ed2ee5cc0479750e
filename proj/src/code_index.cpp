#include "triage/code_index.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "triage/error.hpp"
#include "triage/hash.hpp"

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Words that can precede '(' without naming a function.
const std::set<std::string_view> kNotCallees = {
    "if", "for", "while", "switch", "return", "sizeof", "typeof", "__typeof__", "__typeof",
    "_Alignof", "alignof", "__alignof__", "_Static_assert", "static_assert", "do", "else",
    "case", "goto", "__attribute__", "__attribute", "__declspec", "_Generic", "asm", "__asm__",
    "defined", "__builtin_offsetof", "offsetof", "int", "char", "short", "long", "unsigned",
    "signed", "void", "float", "double", "const", "volatile", "struct", "union", "enum",
};

const std::set<std::string_view> kTypeWords = {
    "static", "extern", "const", "volatile", "inline", "__inline", "__inline__", "register",
    "auto", "unsigned", "signed", "int", "char", "short", "long", "void", "float", "double",
    "struct", "union", "enum", "typedef", "_Bool", "bool", "restrict", "__restrict",
};

/// Blanks comments, string/char literals and preprocessor lines with spaces,
/// keeping every newline so offsets and line numbers stay aligned.
std::string blank_noncode(const std::string& src) {
    std::string out = src;
    const size_t n = src.size();
    size_t i = 0;
    bool line_start = true;
    auto blank = [&](size_t k) {
        if (out[k] != '\n') out[k] = ' ';
    };
    while (i < n) {
        char c = src[i];
        if (line_start && c == '#') {
            // directive runs to an unescaped newline
            while (i < n && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') {
                    blank(i);
                    i += 2;
                    continue;
                }
                if (src[i] == '/' && i + 1 < n && src[i + 1] == '*') {
                    blank(i);
                    blank(i + 1);
                    i += 2;
                    while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) blank(i++);
                    if (i < n) {
                        blank(i);
                        blank(i + 1);
                        i += 2;
                    }
                    continue;
                }
                blank(i++);
            }
            continue;
        }
        if (c == '\n') {
            line_start = true;
            ++i;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        line_start = false;
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') blank(i++);
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            blank(i);
            blank(i + 1);
            i += 2;
            while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) blank(i++);
            if (i < n) {
                blank(i);
                blank(i + 1);
                i += 2;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            const char quote = c;
            ++i;
            while (i < n && src[i] != quote && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n) blank(i++);
                blank(i++);
            }
            if (i < n && src[i] == quote) ++i;
            continue;
        }
        ++i;
    }
    return out;
}

class LineTable {
public:
    explicit LineTable(const std::string& text) {
        starts_.push_back(0);
        for (size_t i = 0; i < text.size(); ++i)
            if (text[i] == '\n') starts_.push_back(i + 1);
    }
    int line_of(size_t offset) const {
        auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
        return static_cast<int>(it - starts_.begin());
    }

private:
    std::vector<size_t> starts_;
};

std::vector<std::string> identifiers(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        if (is_ident_start(text[i]) && (i == 0 || !is_ident_char(text[i - 1]))) {
            size_t j = i;
            while (j < text.size() && is_ident_char(text[j])) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

/// Identifier ending right before `pos` (skipping whitespace), or empty.
std::string ident_before(std::string_view text, size_t pos) {
    size_t end = pos;
    while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    size_t begin = end;
    while (begin > 0 && is_ident_char(text[begin - 1])) --begin;
    if (begin == end || !is_ident_start(text[begin])) return {};
    return std::string(text.substr(begin, end - begin));
}

/// Removes __attribute__((...)) and similar groups so they do not look like parameter lists.
std::string strip_attributes(std::string_view text) {
    std::string out(text);
    for (std::string_view kw : {"__attribute__", "__attribute", "__declspec", "__aligned"}) {
        size_t pos = 0;
        while ((pos = out.find(kw, pos)) != std::string::npos) {
            if (pos > 0 && is_ident_char(out[pos - 1])) {
                pos += kw.size();
                continue;
            }
            size_t k = pos + kw.size();
            while (k < out.size() && std::isspace(static_cast<unsigned char>(out[k]))) ++k;
            if (k >= out.size() || out[k] != '(') {
                pos = k;
                continue;
            }
            int depth = 0;
            size_t e = k;
            for (; e < out.size(); ++e) {
                if (out[e] == '(') ++depth;
                if (out[e] == ')' && --depth == 0) break;
            }
            for (size_t m = pos; m <= e && m < out.size(); ++m)
                if (out[m] != '\n') out[m] = ' ';
            pos = e;
        }
    }
    return out;
}

/// Position of the first '(' at nesting depth zero, or npos.
size_t first_top_paren(std::string_view text) {
    int depth = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '(' && depth == 0) return i;
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
    }
    return std::string_view::npos;
}

size_t first_top_char(std::string_view text, char wanted) {
    int depth = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (depth == 0 && c == wanted) return i;
    }
    return std::string_view::npos;
}

std::vector<std::string_view> split_top_commas(std::string_view text) {
    std::vector<std::string_view> parts;
    int depth = 0;
    size_t start = 0;
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') --depth;
        if (depth == 0 && c == ',') {
            parts.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.push_back(text.substr(start));
    return parts;
}

/// Name introduced by one declarator ("*names[4] = {...}" -> "names").
std::string declarator_name(std::string_view decl) {
    size_t eq = first_top_char(decl, '=');
    std::string_view lhs = decl.substr(0, eq);
    size_t paren = first_top_paren(lhs);
    if (paren != std::string_view::npos) {
        // only function-pointer declarators "(*name)(...)" declare variables
        size_t k = paren + 1;
        while (k < lhs.size() && std::isspace(static_cast<unsigned char>(lhs[k]))) ++k;
        if (k >= lhs.size() || lhs[k] != '*') return {};
        while (k < lhs.size() && (lhs[k] == '*' || std::isspace(static_cast<unsigned char>(lhs[k])))) ++k;
        size_t e = k;
        while (e < lhs.size() && is_ident_char(lhs[e])) ++e;
        return std::string(lhs.substr(k, e - k));
    }
    size_t cut = std::min(lhs.find('['), lhs.find(':'));
    lhs = lhs.substr(0, cut);
    auto ids = identifiers(lhs);
    if (ids.empty()) return {};
    return ids.back();
}

bool starts_with_word(std::string_view text, std::string_view word) {
    auto ids = identifiers(text);
    return !ids.empty() && ids.front() == word;
}

bool contains_word(std::string_view text, std::string_view word) {
    auto ids = identifiers(text);
    return std::find(ids.begin(), ids.end(), word) != ids.end();
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct ScannedFile {
    std::vector<FunctionDef> functions;
    std::vector<StructDef> structs;
    std::vector<GlobalVarDef> globals;
    std::vector<std::pair<std::string, CallerRef>> calls;  // callee, site
    std::vector<std::pair<std::string, std::string>> aliases;  // typedef name, struct tag
};

class FileScanner {
public:
    FileScanner(const std::string& path, const std::string& src)
        : path_(path), src_(src), clean_(blank_noncode(src)), lines_(src) {}

    ScannedFile scan() {
        const size_t n = clean_.size();
        size_t pos = 0;
        while (pos < n) {
            while (pos < n && std::isspace(static_cast<unsigned char>(clean_[pos]))) ++pos;
            if (pos >= n) break;
            const size_t stmt = pos;
            int depth = 0;
            size_t i = pos;
            char stop = 0;
            for (; i < n; ++i) {
                char c = clean_[i];
                if (c == '(' || c == '[') ++depth;
                if (c == ')' || c == ']') --depth;
                if (depth <= 0 && (c == ';' || c == '{' || c == '}')) {
                    stop = c;
                    break;
                }
            }
            if (stop == 0) break;
            if (stop == ';') {
                declaration(stmt, i + 1);
                pos = i + 1;
                continue;
            }
            if (stop == '}') {  // closes an extern "C" / namespace block, or stray
                pos = i + 1;
                continue;
            }
            pos = braced(stmt, i);
        }
        return std::move(out_);
    }

private:
    size_t matching_brace(size_t open) const {
        int depth = 0;
        for (size_t i = open; i < clean_.size(); ++i) {
            if (clean_[i] == '{') ++depth;
            if (clean_[i] == '}' && --depth == 0) return i;
        }
        return clean_.size() - 1;
    }

    /// Offset one past the ';' ending the statement that continues at `from`.
    size_t statement_end(size_t from) const {
        int depth = 0;
        for (size_t i = from; i < clean_.size(); ++i) {
            char c = clean_[i];
            if (c == '(' || c == '[' || c == '{') ++depth;
            if (c == ')' || c == ']' || c == '}') --depth;
            if (depth <= 0 && c == ';') return i + 1;
        }
        return clean_.size();
    }

    std::string original(size_t begin, size_t end) const { return src_.substr(begin, end - begin); }

    // Handles a top-level construct whose header ends at the '{' at `open`.
    size_t braced(size_t stmt, size_t open) {
        const std::string header = strip_attributes(std::string_view(clean_).substr(stmt, open - stmt));
        const size_t close = matching_brace(open);

        if (first_top_char(header, '=') != std::string::npos) {
            size_t end = statement_end(open);
            declaration(stmt, end);
            return end;
        }

        const bool has_paren = first_top_paren(header) != std::string::npos;
        auto ids = identifiers(header);
        auto agg = std::find_if(ids.begin(), ids.end(), [](const std::string& w) {
            return w == "struct" || w == "union" || w == "enum";
        });
        if (!has_paren && agg != ids.end() && std::distance(agg, ids.end()) <= 2) {
            const bool is_enum = *agg == "enum";
            std::string tag = std::distance(agg, ids.end()) == 2 ? *(agg + 1) : std::string{};
            size_t end = statement_end(close + 1);
            std::string_view trailing = std::string_view(clean_).substr(close + 1, end - close - 2);
            const std::string text = original(stmt, end);
            const int line = lines_.line_of(stmt);
            const bool is_typedef = contains_word(header, "typedef");
            if (!is_enum && !tag.empty()) out_.structs.push_back({tag, path_, line, text});
            if (!trim(trailing).empty()) {
                for (auto part : split_top_commas(trailing)) {
                    std::string name = declarator_name(part);
                    if (name.empty()) continue;
                    if (is_typedef) {
                        if (!is_enum && name != tag) out_.structs.push_back({name, path_, line, text});
                    } else {
                        out_.globals.push_back({name, path_, line, text});
                    }
                }
            }
            return end;
        }

        if (!has_paren && (starts_with_word(header, "extern") || starts_with_word(header, "namespace"))) {
            return open + 1;  // descend: contents are top level
        }

        if (has_paren) {
            size_t p = first_top_paren(header);
            std::string name = ident_before(header, p);
            if (!name.empty() && !kNotCallees.count(name) && !kTypeWords.count(name)) {
                function(name, stmt, open, close);
            }
        }
        return close + 1;
    }

    void function(const std::string& name, size_t stmt, size_t open, size_t close) {
        FunctionDef def{name, path_, lines_.line_of(stmt), lines_.line_of(close), original(stmt, close + 1)};
        const std::string_view body = std::string_view(clean_).substr(open, close - open + 1);
        for (size_t i = 0; i < body.size(); ++i) {
            if (!is_ident_start(body[i]) || (i > 0 && is_ident_char(body[i - 1]))) continue;
            size_t j = i;
            while (j < body.size() && is_ident_char(body[j])) ++j;
            size_t k = j;
            while (k < body.size() && std::isspace(static_cast<unsigned char>(body[k]))) ++k;
            if (k < body.size() && body[k] == '(') {
                std::string callee(body.substr(i, j - i));
                size_t b = i;
                while (b > 0 && std::isspace(static_cast<unsigned char>(body[b - 1]))) --b;
                const bool member = b > 0 && (body[b - 1] == '.' || (body[b - 1] == '>' && b > 1 && body[b - 2] == '-'));
                if (!member && !kNotCallees.count(callee)) {
                    out_.calls.push_back({callee, CallerRef{name, path_, lines_.line_of(open + i), def.text}});
                }
            }
            i = j - 1;
        }
        out_.functions.push_back(std::move(def));
    }

    // A top-level statement [begin, end) ending in ';'.
    void declaration(size_t begin, size_t end) {
        std::string_view stmt = std::string_view(clean_).substr(begin, end - begin - 1);
        const std::string cleaned = strip_attributes(stmt);
        auto ids = identifiers(cleaned);
        if (ids.empty() || ids.front() == "extern") return;

        if (ids.front() == "typedef") {
            // typedef struct tag alias;  -> alias resolves to the tag's definition
            if (ids.size() == 4 && (ids[1] == "struct" || ids[1] == "union")) {
                out_.aliases.emplace_back(ids[3], ids[2]);
            }
            return;
        }

        auto parts = split_top_commas(cleaned);
        const std::string_view first = parts.front();
        auto first_lhs = first.substr(0, first_top_char(first, '='));
        // type + declarator at minimum; prototypes and macro invocations are skipped
        const auto lhs_ids = identifiers(first_lhs);
        if (lhs_ids.size() < 2) return;
        // struct tag;  is a forward declaration
        if (lhs_ids.size() == 2 && parts.size() == 1 &&
            (lhs_ids[0] == "struct" || lhs_ids[0] == "union" || lhs_ids[0] == "enum"))
            return;
        const size_t paren = first_top_paren(first_lhs);
        if (paren != std::string_view::npos && declarator_name(first).empty()) return;

        const std::string text = original(begin, end);
        const int line = lines_.line_of(begin);
        for (auto part : parts) {
            std::string name = declarator_name(part);
            if (name.empty() || kTypeWords.count(name)) continue;
            out_.globals.push_back({name, path_, line, text});
        }
    }

    std::string path_;
    const std::string& src_;
    std::string clean_;
    LineTable lines_;
    ScannedFile out_;
};

bool has_extension(const fs::path& p, const IndexOptions& options) {
    const std::string ext = p.extension().string();
    return std::find(options.extensions.begin(), options.extensions.end(), ext) != options.extensions.end();
}

std::vector<fs::path> corpus_files(const fs::path& root, const IndexOptions& options) {
    std::vector<fs::path> files;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
         !ec && it != end; it.increment(ec)) {
        if (it->is_regular_file(ec) && has_extension(it->path(), options)) files.push_back(it->path());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(root).generic_string() < b.lexically_relative(root).generic_string();
    });
    return files;
}

bool read_file(const fs::path& p, std::string& out) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) return false;
    out = ss.str();
    return true;
}

template <class T>
std::vector<T> lookup(const std::map<std::string, std::vector<T>>& table, std::string_view name) {
    auto it = table.find(std::string(name));
    if (it == table.end()) return {};
    return it->second;
}

}  // namespace

void SymbolIndex::index_file(const std::string& rel_path, const std::string& source) {
    files_.push_back(rel_path);
    ScannedFile scanned = FileScanner(rel_path, source).scan();
    for (auto& f : scanned.functions) functions_[f.name].push_back(std::move(f));
    for (auto& s : scanned.structs) structs_[s.name].push_back(std::move(s));
    for (auto& g : scanned.globals) globals_[g.name].push_back(std::move(g));
    for (auto& [callee, ref] : scanned.calls) callers_[callee].push_back(std::move(ref));
    for (auto& [alias, tag] : scanned.aliases) struct_aliases_.emplace(alias, tag);
}

void SymbolIndex::finalize() {
    for (const auto& [alias, tag] : struct_aliases_) {
        auto it = structs_.find(tag);
        if (it == structs_.end()) continue;
        auto& dst = structs_[alias];
        for (const auto& def : structs_.at(tag)) {
            StructDef copy = def;
            copy.name = alias;
            if (std::find(dst.begin(), dst.end(), copy) == dst.end()) dst.push_back(std::move(copy));
        }
    }
    auto by_location = [](const auto& a, const auto& b) {
        return std::tie(a.file, a.line) < std::tie(b.file, b.line);
    };
    for (auto& [_, defs] : functions_) {
        std::stable_sort(defs.begin(), defs.end(), [](const FunctionDef& a, const FunctionDef& b) {
            return std::tie(a.file, a.start_line) < std::tie(b.file, b.start_line);
        });
    }
    for (auto& [_, defs] : structs_) std::stable_sort(defs.begin(), defs.end(), by_location);
    for (auto& [_, defs] : globals_) std::stable_sort(defs.begin(), defs.end(), by_location);
    for (auto& [_, refs] : callers_) {
        std::stable_sort(refs.begin(), refs.end(), [](const CallerRef& a, const CallerRef& b) {
            return std::tie(a.file, a.call_line, a.caller_name) < std::tie(b.file, b.call_line, b.caller_name);
        });
    }
    std::sort(files_.begin(), files_.end());
}

SymbolIndex SymbolIndex::build(const fs::path& root, const IndexOptions& options) {
    SymbolIndex index;
    index.root_ = root;
    Sha256 digest;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        index.warnings_.push_back("corpus root is not a directory: " + root.string());
        index.corpus_hash_ = digest.hex_digest();
        return index;
    }
    for (const auto& file : corpus_files(root, options)) {
        const std::string rel = file.lexically_relative(root).generic_string();
        std::string source;
        if (!read_file(file, source)) {
            index.warnings_.push_back("unreadable file skipped: " + rel);
            continue;
        }
        digest.update(rel);
        digest.update(std::string_view("\0", 1));
        digest.update(source);
        digest.update(std::string_view("\0", 1));
        index.index_file(rel, source);
    }
    index.corpus_hash_ = digest.hex_digest();
    index.finalize();
    return index;
}

SymbolIndex SymbolIndex::build_from_sources(const std::map<std::string, std::string>& sources) {
    SymbolIndex index;
    Sha256 digest;
    for (const auto& [rel, source] : sources) {
        digest.update(rel);
        digest.update(std::string_view("\0", 1));
        digest.update(source);
        digest.update(std::string_view("\0", 1));
        index.index_file(rel, source);
    }
    index.corpus_hash_ = digest.hex_digest();
    index.finalize();
    return index;
}

std::vector<FunctionDef> SymbolIndex::get_func_def(std::string_view name) const { return lookup(functions_, name); }
std::vector<StructDef> SymbolIndex::get_struct_def(std::string_view name) const { return lookup(structs_, name); }
std::vector<GlobalVarDef> SymbolIndex::get_global_var_def(std::string_view name) const { return lookup(globals_, name); }
std::vector<CallerRef> SymbolIndex::get_callers(std::string_view name) const { return lookup(callers_, name); }

std::string SymbolIndex::get_function_first_part(std::string_view name, int max_lines) const {
    auto defs = get_func_def(name);
    if (defs.empty()) throw Error("unknown function: " + std::string(name));
    const std::string& text = defs.front().text;
    if (max_lines <= 0) return {};
    size_t pos = 0;
    for (int line = 0; line < max_lines; ++line) {
        pos = text.find('\n', pos);
        if (pos == std::string::npos) return text;
        ++pos;
    }
    return text.substr(0, pos - 1);
}

std::optional<FunctionDef> SymbolIndex::function_at(std::string_view file, int line) const {
    std::optional<FunctionDef> best;
    for (const auto& [_, defs] : functions_) {
        for (const auto& def : defs) {
            if (def.file != file || line < def.start_line || line > def.end_line) continue;
            if (!best || def.end_line - def.start_line < best->end_line - best->start_line) best = def;
        }
    }
    return best;
}

bool SymbolIndex::has_file(std::string_view file) const {
    return std::binary_search(files_.begin(), files_.end(), std::string(file));
}

namespace {

json function_json(const FunctionDef& d) {
    return {{"name", d.name}, {"file", d.file}, {"start_line", d.start_line}, {"end_line", d.end_line}, {"text", d.text}};
}

template <class T>
json located_json(const T& d) {
    return {{"name", d.name}, {"file", d.file}, {"line", d.line}, {"text", d.text}};
}

}  // namespace

std::string SymbolIndex::to_json() const {
    json j;
    j["root"] = root_.generic_string();
    j["corpus_hash"] = corpus_hash_;
    j["files"] = files_;
    j["warnings"] = warnings_;
    json& fns = j["functions"] = json::object();
    for (const auto& [name, defs] : functions_)
        for (const auto& d : defs) fns[name].push_back(function_json(d));
    json& sts = j["structs"] = json::object();
    for (const auto& [name, defs] : structs_)
        for (const auto& d : defs) sts[name].push_back(located_json(d));
    json& gls = j["globals"] = json::object();
    for (const auto& [name, defs] : globals_)
        for (const auto& d : defs) gls[name].push_back(located_json(d));
    json& cls = j["callers"] = json::object();
    for (const auto& [name, refs] : callers_)
        for (const auto& r : refs)
            cls[name].push_back({{"caller_name", r.caller_name}, {"file", r.file}, {"call_line", r.call_line}, {"snippet", r.snippet}});
    j["struct_aliases"] = struct_aliases_;
    return j.dump(1);
}

SymbolIndex SymbolIndex::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("index cache: ") + e.what());
    }
    SymbolIndex index;
    try {
        index.root_ = j.at("root").get<std::string>();
        index.corpus_hash_ = j.at("corpus_hash").get<std::string>();
        index.files_ = j.at("files").get<std::vector<std::string>>();
        index.warnings_ = j.at("warnings").get<std::vector<std::string>>();
        for (const auto& [name, defs] : j.at("functions").items())
            for (const auto& d : defs)
                index.functions_[name].push_back({d.at("name"), d.at("file"), d.at("start_line"), d.at("end_line"), d.at("text")});
        for (const auto& [name, defs] : j.at("structs").items())
            for (const auto& d : defs) index.structs_[name].push_back({d.at("name"), d.at("file"), d.at("line"), d.at("text")});
        for (const auto& [name, defs] : j.at("globals").items())
            for (const auto& d : defs) index.globals_[name].push_back({d.at("name"), d.at("file"), d.at("line"), d.at("text")});
        for (const auto& [name, refs] : j.at("callers").items())
            for (const auto& r : refs)
                index.callers_[name].push_back({r.at("caller_name"), r.at("file"), r.at("call_line"), r.at("snippet")});
        index.struct_aliases_ = j.at("struct_aliases").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("index cache: ") + e.what());
    }
    return index;
}

std::string corpus_hash(const fs::path& root, const IndexOptions& options) {
    Sha256 digest;
    for (const auto& file : corpus_files(root, options)) {
        std::string source;
        if (!read_file(file, source)) continue;
        digest.update(file.lexically_relative(root).generic_string());
        digest.update(std::string_view("\0", 1));
        digest.update(source);
        digest.update(std::string_view("\0", 1));
    }
    return digest.hex_digest();
}

void save_index_cache(const SymbolIndex& index, const fs::path& cache_path) {
    if (cache_path.has_parent_path()) fs::create_directories(cache_path.parent_path());
    std::ofstream out(cache_path, std::ios::binary);
    if (!out) throw Error("cannot write index cache: " + cache_path.string());
    out << index.to_json();
}

SymbolIndex load_or_build_index(const fs::path& root, const fs::path& cache_path, const IndexOptions& options) {
    std::string cached;
    if (!cache_path.empty() && read_file(cache_path, cached)) {
        try {
            SymbolIndex index = SymbolIndex::from_json(cached);
            if (index.corpus_hash() == corpus_hash(root, options)) {
                index.root_ = root;
                return index;
            }
        } catch (const ParseError&) {
            // stale or corrupt cache: rebuild below
        }
    }
    SymbolIndex index = SymbolIndex::build(root, options);
    if (!cache_path.empty()) save_index_cache(index, cache_path);
    return index;
}

}  // namespace triage
