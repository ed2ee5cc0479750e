#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

struct FunctionDef {
    std::string name;
    std::string file;  // relative to the index root, '/' separated
    int start_line = 0;
    int end_line = 0;
    std::string text;

    bool operator==(const FunctionDef&) const = default;
};

struct StructDef {
    std::string name;
    std::string file;
    int line = 0;
    std::string text;

    bool operator==(const StructDef&) const = default;
};

struct GlobalVarDef {
    std::string name;
    std::string file;
    int line = 0;
    std::string text;

    bool operator==(const GlobalVarDef&) const = default;
};

/// One direct call site of a function. `snippet` is the whole calling function.
struct CallerRef {
    std::string caller_name;
    std::string file;
    int call_line = 0;
    std::string snippet;

    bool operator==(const CallerRef&) const = default;
};

struct IndexOptions {
    std::vector<std::string> extensions{".c", ".h", ".cc", ".cpp", ".cxx", ".hh", ".hpp"};
};

/// Symbol table over a C source tree: top-level function, struct/union and
/// file-scope variable definitions plus direct call edges.
///
/// Scanning is grammar-aware but not a compiler: comments, literals and
/// preprocessor lines are blanked, then top-level statements are split on
/// balanced braces. All branches of preprocessor conditionals are visible and
/// macros are not expanded. Calls through pointers or members are not edges.
///
/// Lookups return every definition of a name ordered by (file, line). The
/// index is immutable once built and may be shared between threads.
class SymbolIndex {
public:
    SymbolIndex() = default;

    /// Never fails on individual files; unreadable ones end up in warnings().
    static SymbolIndex build(const std::filesystem::path& root, const IndexOptions& options = {});

    /// Indexes in-memory sources keyed by relative path (used by tests and the cache).
    static SymbolIndex build_from_sources(const std::map<std::string, std::string>& sources);

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::string& corpus_hash() const noexcept { return corpus_hash_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    std::vector<FunctionDef> get_func_def(std::string_view name) const;
    std::vector<StructDef> get_struct_def(std::string_view name) const;
    std::vector<GlobalVarDef> get_global_var_def(std::string_view name) const;
    std::vector<CallerRef> get_callers(std::string_view func_name) const;

    /// First `max_lines` lines of the first definition of `name`.
    /// Throws Error when the name is unknown.
    std::string get_function_first_part(std::string_view name, int max_lines) const;

    /// Innermost indexed function in `file` whose line range contains `line`.
    std::optional<FunctionDef> function_at(std::string_view file, int line) const;

    bool has_file(std::string_view file) const;

    const std::map<std::string, std::vector<FunctionDef>>& functions() const noexcept { return functions_; }
    const std::map<std::string, std::vector<StructDef>>& structs() const noexcept { return structs_; }
    const std::map<std::string, std::vector<GlobalVarDef>>& globals() const noexcept { return globals_; }
    const std::map<std::string, std::vector<CallerRef>>& call_edges() const noexcept { return callers_; }

    /// Deterministic serialization; from_json(to_json()) reproduces the index exactly.
    std::string to_json() const;
    static SymbolIndex from_json(std::string_view text);

    bool operator==(const SymbolIndex&) const = default;

private:
    friend SymbolIndex load_or_build_index(const std::filesystem::path&, const std::filesystem::path&,
                                           const IndexOptions&);

    void index_file(const std::string& rel_path, const std::string& source);
    void finalize();

    std::filesystem::path root_;
    std::string corpus_hash_;
    std::vector<std::string> files_;
    std::vector<std::string> warnings_;
    std::map<std::string, std::vector<FunctionDef>> functions_;
    std::map<std::string, std::vector<StructDef>> structs_;
    std::map<std::string, std::vector<GlobalVarDef>> globals_;
    std::map<std::string, std::vector<CallerRef>> callers_;
    std::map<std::string, std::string> struct_aliases_;  // typedef name -> struct tag
};

/// Content digest of every indexable file under root (paths and bytes).
std::string corpus_hash(const std::filesystem::path& root, const IndexOptions& options = {});

/// Loads `cache_path` when its recorded corpus hash matches the tree, else
/// rebuilds and rewrites the cache.
SymbolIndex load_or_build_index(const std::filesystem::path& root,
                                const std::filesystem::path& cache_path,
                                const IndexOptions& options = {});

void save_index_cache(const SymbolIndex& index, const std::filesystem::path& cache_path);

}  // namespace triage
