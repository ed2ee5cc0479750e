#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "triage/analysis.hpp"
#include "triage/cona.hpp"
#include "triage/llm_gateway.hpp"
#include "triage/secia.hpp"
#include "triage/var_infer.hpp"

namespace triage {

class SymbolIndex;

enum class FinalLabel { Positive, Negative, UncertainPositive };

std::string_view to_string(FinalLabel label);
FinalLabel final_label_from_string(std::string_view text);

/// {still_a_bug, likely_unsafe} -> positive; {eliminated, likely_safe,
/// not_exploitable} -> negative; uncertain -> uncertain_positive.
FinalLabel label_for_verdict(FinalVerdict verdict);

/// SecIA not_a_bug is negative regardless of ConA; otherwise the ConA (or
/// simple-prompt) verdict decides; no verdict at all is uncertain_positive.
FinalLabel map_final_label(std::optional<SeciaLabel> secia, std::optional<FinalVerdict> verdict);

struct Ablation {
    bool ac_hypo = true;
    bool sag = true;
    bool simple_prompt = false;
};

struct ProviderConfig {
    std::string base_url_env = "OPENAI_BASE_URL";
    std::string api_key_env = "OPENAI_API_KEY";
    int attempts = 3;
    int backoff_ms = 500;
    double requests_per_second = 0.0;
};

struct RunConfig {
    ModelConfig model;
    AgentBudget budget;
    Ablation ablation;
    bool few_shot = false;
    int function_first_part_lines = 60;
    ProviderConfig provider;
    RateTable rates{{"o3-mini-2025-01-31", {1.1e-6, 4.4e-6}}};
    int workers = 1;
    std::string prompts_dir;  // empty: the prompts shipped with the build
    std::string corpus_root;
    std::string reports_path;
    GatewayMode mode = GatewayMode::Replay;

    /// Applies simple_prompt => !sag and checks every field. Throws Error.
    void normalize();

    /// "full", "no_sag" or "simple_prompt" (with a "_no_ac_hypo" suffix when off).
    std::string name() const;

    AnalysisSettings analysis_settings(std::shared_ptr<const PromptLibrary> prompts) const;

    /// Missing keys keep their defaults.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

struct SimpleOutcome {
    FinalVerdict verdict = FinalVerdict::Uncertain;
    std::map<FinalVerdict, int> tally;
    std::vector<FinalVerdict> votes;

    bool operator==(const SimpleOutcome&) const = default;
};

/// One direct question per vote followed by the final_res summary.
SimpleOutcome run_simple(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                         LlmGateway& gateway, const AnalysisSettings& settings);

struct TranscriptRef {
    std::string stage;
    int vote_index = 0;
    std::string request_hash;

    bool operator==(const TranscriptRef&) const = default;
};

struct CaseResult {
    std::string case_id;
    InferredTaint inferred;
    std::optional<ImpactAssessment> secia;
    std::optional<ConaOutcome> cona;
    std::optional<SimpleOutcome> simple;
    FinalLabel final_label = FinalLabel::UncertainPositive;
    std::string error;
    std::vector<TranscriptRef> transcripts;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double cost = 0.0;
};

/// var-infer, then SecIA and (unless SecIA says not_a_bug) ConA; or the
/// simple prompt when that ablation is on. Never throws for case-level
/// problems: an unanalyzable case comes back uncertain_positive with `error`.
CaseResult run_case(const TaintReport& report, const RunConfig& config, const SymbolIndex& index,
                    LlmGateway& gateway, const AnalysisSettings& settings);

struct RunSummary {
    size_t cases = 0;
    std::map<FinalLabel, int> label_counts;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double total_cost = 0.0;
    int errors = 0;
};

struct BatchOutput {
    std::vector<CaseResult> results;  // sorted by case_id
    RunSummary summary;
};

/// Runs every report on `config.workers` threads. Output order does not
/// depend on the worker count.
BatchOutput run_batch(const std::vector<TaintReport>& reports, const RunConfig& config, const SymbolIndex& index,
                      LlmGateway& gateway, const AnalysisSettings& settings);

nlohmann::json to_json(const CaseResult& result);
nlohmann::json to_json(const RunSummary& summary);

std::string results_jsonl(const std::vector<CaseResult>& results);
/// Human report: summary, then positives (with ConA reasoning excerpts), then negatives.
std::string render_markdown(const BatchOutput& output, const std::string& config_name);

/// Writes results.jsonl, report.md and summary.json into `out_dir`.
void emit_report(const BatchOutput& output, const std::string& config_name, const std::filesystem::path& out_dir);

/// (case_id, final_label) pairs from a results.jsonl file.
std::vector<std::pair<std::string, FinalLabel>> read_result_labels(const std::filesystem::path& path);

}  // namespace triage
