#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "triage/report.hpp"

namespace triage {

class SymbolIndex;

enum class Stage {
    VarInfer,
    VarInferSummarize,
    SecIA,
    SecIASummarize,
    ConA1,
    ConA2,
    ConA3,
    ConA4,
    ConASummarize,
    Simple,
};

/// Manifest spelling: "var_infer", "secia_summarize", "cona3", ...
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view text);

enum class ToolKind { FuncDef, StructDef, Caller, GlobalVarDef };

/// Protocol spelling: "need_func_def", "need_struct_def", ...
std::string_view to_string(ToolKind kind);
ToolKind tool_kind_from_string(std::string_view text);

struct ToolRequest {
    ToolKind kind = ToolKind::FuncDef;
    std::vector<std::string> args;

    bool operator==(const ToolRequest&) const = default;
};

struct PromptTemplate {
    Stage stage = Stage::VarInfer;
    std::string body;
    std::vector<std::string> args;
    std::set<ToolKind> callbacks;
    std::string few_shot;  // empty when the stage has no example asset
};

/// What a case offers to the argument providers.
struct CaseContext {
    const TaintReport* report = nullptr;
    /// Replaces report->tainted_value when non-empty (var-infer output).
    std::string tainted_value;
    int function_first_part_lines = 60;
};

struct RenderOptions {
    bool ac_hypo = true;
    bool sag = true;
    bool few_shot = false;
};

/// Stage templates loaded from a prompt directory with a manifest.json.
///
/// Bodies use `{}` for positional arguments and `{AGENT PROMPTS HERE}` for
/// the tool protocol. Whole-line markers delimit optional blocks:
/// [[sag]]..[[/sag]], [[ac_hypo]]..[[/ac_hypo]], and [[few_shot]] for the
/// example asset.
class PromptLibrary {
public:
    /// Throws Error when the manifest is malformed, a file is missing, or a
    /// body's placeholder count differs from its argument list.
    static PromptLibrary load(const std::filesystem::path& dir);
    static PromptLibrary load_default();

    const PromptTemplate& get(Stage stage) const;
    const std::string& agent_protocol() const noexcept { return agent_protocol_; }

    std::string render(Stage stage, const CaseContext& ctx, const SymbolIndex& index,
                       const RenderOptions& options = {}) const;

private:
    std::map<Stage, PromptTemplate> templates_;
    std::string agent_protocol_;
};

/// Substitutes arguments and resolves block markers. Throws RenderError
/// naming the first provider that cannot be resolved.
std::string render(const PromptTemplate& tmpl, const CaseContext& ctx, const SymbolIndex& index,
                   const RenderOptions& options, std::string_view agent_protocol);

/// Value of one named argument provider, e.g. "get_call_chain".
std::string resolve_provider(std::string_view provider, const CaseContext& ctx, const SymbolIndex& index);

/// The definition of the report's sink function used for prompts: the one in
/// sink_file spanning sink_line when present, else the first by path.
std::optional<std::string> sink_function_text(const TaintReport& report, const SymbolIndex& index,
                                              bool cut_after_sink);

// ---- response schemas ----

enum class SeciaLabel { NotABug, PotentialBug, Uncertain };

std::string_view to_string(SeciaLabel label);
SeciaLabel secia_label_from_string(std::string_view text);
/// Lower is more conservative (kept as a bug).
int conservative_rank(SeciaLabel label);

struct Vulnerability {
    std::string type;
    std::string description;

    bool operator==(const Vulnerability&) const = default;
};

struct SeciaVerdict {
    SeciaLabel label = SeciaLabel::Uncertain;
    std::string tainted_var;
    std::vector<Vulnerability> vulns;  // non-empty iff label is PotentialBug

    bool operator==(const SeciaVerdict&) const = default;
};

enum class PreconditionKind { DominateCondition, GuardCondition };

std::string_view to_string(PreconditionKind kind);

struct SinkPrecondition {
    PreconditionKind kind = PreconditionKind::DominateCondition;
    std::string condition;
    std::string context;

    bool operator==(const SinkPrecondition&) const = default;
};

enum class ConstraintKind { Validation, Sanitization, TypeConstraint };

std::string_view to_string(ConstraintKind kind);

struct RangeConstraint {
    ConstraintKind kind = ConstraintKind::Validation;
    std::string handler_func;
    std::string context;

    bool operator==(const RangeConstraint&) const = default;
};

struct ConditionPair {
    std::string precondition;
    std::string postcondition;
    std::string context;

    bool operator==(const ConditionPair&) const = default;
};

enum class FinalVerdict { StillABug, Eliminated, LikelySafe, LikelyUnsafe, NotExploitable, Uncertain };

std::string_view to_string(FinalVerdict verdict);
FinalVerdict final_verdict_from_string(std::string_view text);
int conservative_rank(FinalVerdict verdict);

struct SourceVar {
    std::string name;
    std::string field;
    int line = 0;

    bool operator==(const SourceVar&) const = default;
};

/// Every <request> inside <requests> blocks, in order. Empty when the text
/// has no <requests> tag. Throws ParseError on a malformed block.
std::vector<ToolRequest> parse_requests(std::string_view response);

// The parsers below read the last occurrence of their root element and throw
// ParseError when it is missing or malformed.
SeciaVerdict parse_bug_eval(std::string_view response);
std::vector<SinkPrecondition> parse_sink_precondi(std::string_view response);
std::vector<RangeConstraint> parse_range_constraints(std::string_view response);
std::vector<ConditionPair> parse_condition_pairs(std::string_view response);
FinalVerdict parse_final_res(std::string_view response);
std::vector<SourceVar> parse_tainted_vars(std::string_view response);

// Serializers producing text the parsers above accept.
std::string to_xml(const std::vector<ToolRequest>& requests);
std::string to_xml(const SeciaVerdict& verdict);
std::string to_xml(const std::vector<SinkPrecondition>& preconditions);
std::string to_xml(const std::vector<RangeConstraint>& constraints);
std::string to_xml(const std::string& handler_func, ConstraintKind kind, const std::vector<ConditionPair>& pairs);
std::string to_xml(FinalVerdict verdict);
std::string to_xml(const std::vector<SourceVar>& vars);

/// Root element a stage's answer is expected in ("bug_eval", "final_res", ...);
/// empty for stages answered in prose.
std::string_view schema_root(Stage stage);

/// The example output block of a rendered prompt, from the first opening to
/// the last closing root tag. Used to ask the model to re-emit its answer.
std::string schema_excerpt(std::string_view rendered_prompt, std::string_view root);

}  // namespace triage
