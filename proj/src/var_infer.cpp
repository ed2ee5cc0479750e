#include "triage/var_infer.hpp"

#include "triage/code_index.hpp"
#include "triage/error.hpp"

namespace triage {

InferredTaint infer_variable_names(const TaintReport& report, const SymbolIndex& index, LlmGateway& gateway,
                                   const AnalysisSettings& settings) {
    InferredTaint out;
    out.case_id = report.case_id;
    const PromptLibrary& lib = settings.library();
    CaseContext ctx{&report, {}, settings.function_first_part_lines};
    const std::string prompt = lib.render(Stage::VarInfer, ctx, index, settings.render);
    const std::string summary = lib.render(Stage::VarInferSummarize, ctx, index, settings.render);

    StageCall call{gateway, settings, report.case_id, 0};
    try {
        Conversation conv;
        conv.add_user(prompt);
        out.notes = call.ask(conv, Stage::VarInfer);
        conv.add_user(summary);
        const std::string answer = call.ask(conv, Stage::VarInferSummarize);
        auto vars = parse_with_retry(conv, call, Stage::VarInferSummarize, answer,
                                     schema_excerpt(summary, "tainted_vars"), parse_tainted_vars);
        for (auto& v : vars) {
            if (report.source_line_set.count(v.line)) out.source_vars.push_back(std::move(v));
        }
    } catch (const RenderError&) {
        throw;
    } catch (const Error& e) {
        out.notes += (out.notes.empty() ? "" : "\n") + std::string("inference failed: ") + e.what();
    }
    out.fallback = out.source_vars.empty();
    return out;
}

std::string describe_tainted_value(const InferredTaint& inferred, const TaintReport& report) {
    if (inferred.fallback || inferred.source_vars.empty()) return report.tainted_value;
    std::string out;
    for (const auto& v : inferred.source_vars) {
        if (!out.empty()) out += "; ";
        out += v.name + " (";
        if (!v.field.empty()) out += "field " + v.field + ", ";
        out += "line " + std::to_string(v.line) + ")";
    }
    return out;
}

}  // namespace triage
