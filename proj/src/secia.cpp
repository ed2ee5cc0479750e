#include "triage/secia.hpp"

#include "triage/code_index.hpp"
#include "triage/error.hpp"
#include "triage/majority_vote.hpp"
#include "triage/pka_agent.hpp"
#include "triage/xml_extract.hpp"

namespace triage {

namespace {

std::string source_line(const TaintReport& report, const SymbolIndex& index) {
    for (const auto& def : index.get_func_def(report.sink_function())) {
        if (def.file != report.sink_file || report.sink_line < def.start_line || report.sink_line > def.end_line)
            continue;
        size_t pos = 0;
        for (int l = def.start_line; l < report.sink_line; ++l) pos = def.text.find('\n', pos) + 1;
        const size_t eol = def.text.find('\n', pos);
        return xml::trim(def.text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos));
    }
    return report.sink_file + ":" + std::to_string(report.sink_line);
}

}  // namespace

ImpactAssessment assess_impact(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                               LlmGateway& gateway, const AnalysisSettings& settings) {
    const PromptLibrary& lib = settings.library();
    CaseContext ctx{&report, describe_tainted_value(inferred, report), settings.function_first_part_lines};
    const std::string prompt = lib.render(Stage::SecIA, ctx, index, settings.render);
    const std::string summary = lib.render(Stage::SecIASummarize, ctx, index, settings.render);
    const std::string schema = schema_excerpt(summary, "bug_eval");

    std::vector<SeciaVerdict> per_vote(static_cast<size_t>(std::max(settings.model.vote_count, 0)));
    auto run_once = [&](int vote) {
        StageCall call{gateway, settings, report.case_id, vote};
        Conversation conv;
        conv.add_user(prompt);
        AgentSession session;
        run_agent(conv, lib.get(Stage::SecIA).callbacks, index, settings.budget, gateway, settings.model,
                  call.tag(Stage::SecIA), session);
        conv.add_user(summary);
        const std::string answer = call.ask(conv, Stage::SecIASummarize);
        SeciaVerdict v = parse_with_retry(conv, call, Stage::SecIASummarize, answer, schema, parse_bug_eval);
        per_vote[static_cast<size_t>(vote)] = v;
        return v.label;
    };
    auto outcome = majority_vote<SeciaLabel>(run_once, settings.model.vote_count, SeciaLabel::Uncertain,
                                             [](SeciaLabel l) { return conservative_rank(l); });

    ImpactAssessment out;
    out.case_id = report.case_id;
    out.ac_hypo_applied = settings.render.ac_hypo;
    out.tally = outcome.tally;
    out.votes = outcome.votes;
    out.verdict.label = outcome.verdict;
    for (size_t i = 0; i < outcome.votes.size(); ++i) {
        if (outcome.votes[i] == outcome.verdict && per_vote[i].label == outcome.verdict) {
            out.verdict = per_vote[i];
            break;
        }
    }
    if (out.verdict.label == SeciaLabel::PotentialBug) {
        if (out.verdict.vulns.empty()) out.verdict.vulns.push_back({"unspecified", ""});
        out.critical_ops.push_back({source_line(report, index), report.sink_line});
    }
    return out;
}

FilterResult filter_cases(const std::vector<ImpactAssessment>& assessments) {
    FilterResult out;
    for (const auto& a : assessments) {
        if (a.verdict.label == SeciaLabel::NotABug) out.eliminated.push_back(a);
        else out.proceed.push_back(a);
    }
    return out;
}

}  // namespace triage
