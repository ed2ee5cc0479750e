#pragma once

#include <string>
#include <vector>

#include "triage/analysis.hpp"
#include "triage/prompt_engine.hpp"
#include "triage/report.hpp"

namespace triage {

class SymbolIndex;

struct InferredTaint {
    std::string case_id;
    std::vector<SourceVar> source_vars;
    std::string notes;
    /// True when no usable names came back and prompts use the report's descriptor.
    bool fallback = false;

    bool operator==(const InferredTaint&) const = default;
};

/// Asks the model to map the IR-level taint facts to source variables.
///
/// One query plus a schema summary, with one reformat retry; no voting.
/// Names on lines outside the report's line set are dropped. Throws
/// RenderError when the sink function cannot be found in the index; every
/// other failure degrades to fallback = true.
InferredTaint infer_variable_names(const TaintReport& report, const SymbolIndex& index, LlmGateway& gateway,
                                   const AnalysisSettings& settings);

/// Tainted-value text for later prompts: "v (field id.index, line 42)", or
/// the report's descriptor when inference fell back.
std::string describe_tainted_value(const InferredTaint& inferred, const TaintReport& report);

}  // namespace triage
