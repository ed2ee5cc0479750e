#pragma once

#include <map>
#include <string>
#include <vector>

#include "triage/analysis.hpp"
#include "triage/prompt_engine.hpp"
#include "triage/report.hpp"
#include "triage/var_infer.hpp"

namespace triage {

class SymbolIndex;

struct CriticalOp {
    std::string text;
    int line = 0;

    bool operator==(const CriticalOp&) const = default;
};

struct ImpactAssessment {
    std::string case_id;
    SeciaVerdict verdict;
    std::vector<CriticalOp> critical_ops;  // non-empty when the verdict is potential_bug
    bool ac_hypo_applied = true;
    std::map<SeciaLabel, int> tally;
    std::vector<SeciaLabel> votes;

    bool operator==(const ImpactAssessment&) const = default;
};

/// Runs the SecIA exchange (prompt, tool loop, summary) once per vote and
/// takes the majority. A vote whose summary cannot be parsed after one
/// reformat retry, or that fails otherwise, counts as uncertain.
ImpactAssessment assess_impact(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                               LlmGateway& gateway, const AnalysisSettings& settings);

struct FilterResult {
    std::vector<ImpactAssessment> proceed;
    std::vector<ImpactAssessment> eliminated;
};

/// not_a_bug is eliminated; potential_bug and uncertain proceed. Order is kept.
FilterResult filter_cases(const std::vector<ImpactAssessment>& assessments);

}  // namespace triage
