#include "triage/cona.hpp"

#include <set>

#include "triage/code_index.hpp"
#include "triage/error.hpp"
#include "triage/majority_vote.hpp"

namespace triage {

ConaSession::ConaSession(const TaintReport& report, std::string tainted_value, const SymbolIndex& idx,
                         LlmGateway& gateway, const AnalysisSettings& settings, int vote_index)
    : ctx{&report, std::move(tainted_value), settings.function_first_part_lines},
      index(idx),
      call{gateway, settings, report.case_id, vote_index} {}

std::string ConaSession::render(Stage stage) const {
    return call.settings.library().render(stage, ctx, index, call.settings.render);
}

std::string ConaSession::ask_with_agent(Stage stage, const std::string& prompt) {
    conversation.add_user(prompt);
    const auto& callbacks = call.settings.library().get(stage).callbacks;
    return run_agent(conversation, callbacks, index, call.settings.budget, call.gateway, call.settings.model,
                     call.tag(stage), agent)
        .final_response;
}

std::vector<SinkPrecondition> step1_reachability(ConaSession& session) {
    const std::string prompt = session.render(Stage::ConA1);
    const std::string answer = session.ask_with_agent(Stage::ConA1, prompt);
    return parse_with_retry(session.conversation, session.call, Stage::ConA1, answer,
                            schema_excerpt(prompt, "sink_precondi"), parse_sink_precondi);
}

std::vector<RangeConstraint> step2_collect_constraints(ConaSession& session) {
    const std::string prompt = session.render(Stage::ConA2);
    const std::string answer = session.ask_with_agent(Stage::ConA2, prompt);
    return parse_with_retry(session.conversation, session.call, Stage::ConA2, answer,
                            schema_excerpt(prompt, "range_constraints"), parse_range_constraints);
}

std::vector<ConditionPair> step3_effect_analysis(ConaSession& session, const RangeConstraint& constraint) {
    const std::string body = session.render(Stage::ConA3);
    std::string prompt = std::string(kConstraintHeader) + std::string(to_string(constraint.kind)) + " in " +
                         constraint.handler_func;
    if (!constraint.context.empty()) prompt += ": " + constraint.context;
    prompt += "\n\n" + body;
    const std::string answer = session.ask_with_agent(Stage::ConA3, prompt);
    return parse_with_retry(session.conversation, session.call, Stage::ConA3, answer,
                            schema_excerpt(body, "range_constraint"), parse_condition_pairs);
}

std::pair<FinalVerdict, std::string> step4_evaluate(ConaSession& session, const ConaTrace& so_far) {
    std::string prompt = session.render(Stage::ConA4);
    if (so_far.step2.empty()) prompt = std::string(kNoConstraintsHeader) + "\n\n" + prompt;
    std::string rationale = session.ask_with_agent(Stage::ConA4, prompt);

    const std::string summary = session.render(Stage::ConASummarize);
    session.conversation.add_user(summary);
    const std::string answer = session.call.ask(session.conversation, Stage::ConASummarize);
    const FinalVerdict verdict = parse_with_retry(session.conversation, session.call, Stage::ConASummarize, answer,
                                                  "<final_res>still_a_bug</final_res>", parse_final_res);
    return {verdict, std::move(rationale)};
}

ConaTrace run_cona_once(ConaSession& session) {
    ConaTrace trace;
    trace.step1 = step1_reachability(session);
    trace.step2 = step2_collect_constraints(session);
    std::set<std::string> seen;
    for (const auto& c : trace.step2) {
        if (!seen.insert(c.handler_func).second) continue;
        trace.step3[c.handler_func] = step3_effect_analysis(session, c);
    }
    auto [verdict, rationale] = step4_evaluate(session, trace);
    trace.verdict = verdict;
    trace.rationale = std::move(rationale);
    return trace;
}

ConaOutcome run_cona(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                     LlmGateway& gateway, const AnalysisSettings& settings) {
    ConaOutcome out;
    out.traces.resize(static_cast<size_t>(std::max(settings.model.vote_count, 0)));
    const std::string tainted = describe_tainted_value(inferred, report);
    auto run_once = [&](int vote) {
        ConaTrace& slot = out.traces[static_cast<size_t>(vote)];
        ConaSession session(report, tainted, index, gateway, settings, vote);
        try {
            slot = run_cona_once(session);
        } catch (const std::exception& e) {
            slot.error = e.what();
            throw;
        }
        return *slot.verdict;
    };
    auto vote = majority_vote<FinalVerdict>(run_once, settings.model.vote_count, FinalVerdict::Uncertain,
                                            [](FinalVerdict v) { return conservative_rank(v); });
    out.verdict = vote.verdict;
    out.tally = vote.tally;
    out.votes = vote.votes;
    for (size_t i = 0; i < out.votes.size(); ++i) {
        if (out.votes[i] == out.verdict) {
            out.chosen_vote = static_cast<int>(i);
            break;
        }
    }
    return out;
}

}  // namespace triage
