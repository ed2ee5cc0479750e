#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "triage/analysis.hpp"
#include "triage/prompt_engine.hpp"
#include "triage/report.hpp"
#include "triage/var_infer.hpp"

namespace triage {

class SymbolIndex;

/// What one ConA conversation established, step by step.
struct ConaTrace {
    std::vector<SinkPrecondition> step1;
    std::vector<RangeConstraint> step2;
    std::map<std::string, std::vector<ConditionPair>> step3;  // keyed by handler_func
    std::optional<FinalVerdict> verdict;
    std::string rationale;
    std::string error;  // why the vote ended without a verdict

    bool operator==(const ConaTrace&) const = default;
};

/// One growing conversation shared by the four steps of a single vote.
struct ConaSession {
    ConaSession(const TaintReport& report, std::string tainted_value, const SymbolIndex& index, LlmGateway& gateway,
                const AnalysisSettings& settings, int vote_index);

    CaseContext ctx;
    const SymbolIndex& index;
    StageCall call;
    Conversation conversation;
    AgentSession agent;

    std::string render(Stage stage) const;
    /// Appends `prompt`, runs the tool loop for `stage`, returns the final answer.
    std::string ask_with_agent(Stage stage, const std::string& prompt);
};

std::vector<SinkPrecondition> step1_reachability(ConaSession& session);
std::vector<RangeConstraint> step2_collect_constraints(ConaSession& session);
/// Pairs for one constraining function; the prompt names the constraint first.
std::vector<ConditionPair> step3_effect_analysis(ConaSession& session, const RangeConstraint& constraint);
/// Final evaluation and summary; returns the verdict and the step-4 reasoning.
std::pair<FinalVerdict, std::string> step4_evaluate(ConaSession& session, const ConaTrace& so_far);

/// Runs steps 1 to 4 in one conversation for one vote.
ConaTrace run_cona_once(ConaSession& session);

struct ConaOutcome {
    FinalVerdict verdict = FinalVerdict::Uncertain;
    std::map<FinalVerdict, int> tally;
    std::vector<FinalVerdict> votes;
    std::vector<ConaTrace> traces;  // one per vote
    int chosen_vote = -1;           // first vote agreeing with the verdict

    bool operator==(const ConaOutcome&) const = default;
};

/// Majority vote over independent ConA conversations. A vote that fails
/// counts as uncertain.
ConaOutcome run_cona(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                     LlmGateway& gateway, const AnalysisSettings& settings);

inline constexpr std::string_view kNoConstraintsHeader = "No constraints on the tainted value were found in step 2.";
inline constexpr std::string_view kConstraintHeader = "Constraint under analysis: ";

}  // namespace triage
