#include <doctest.h>

#include <json.hpp>

#include "e2e.hpp"
#include "triage/cona.hpp"
#include "triage/secia.hpp"
#include "triage/var_infer.hpp"

using namespace triage;
using nlohmann::json;

namespace {

const TaintReport& fixture_case(const std::string& id) {
    static const auto reports = parse_report_file(fixtures::e2e() / "reports.jsonl");
    for (const auto& r : reports)
        if (r.case_id == id) return r;
    throw std::runtime_error("no fixture case " + id);
}

json fixture_script() { return json::parse(fixtures::read(fixtures::e2e() / "script.json")); }

/// Live gateway over a script; keeps the backend alive with the gateway.
struct Live {
    explicit Live(json script)
        : gateway({GatewayMode::Live}, std::make_shared<ScriptedBackend>(std::move(script)), nullptr, nullptr) {}
    LlmGateway gateway;
};

AnalysisSettings settings(int votes = 3) {
    AnalysisSettings s;
    s.prompts = fixtures::prompts();
    s.model.vote_count = votes;
    return s;
}

std::vector<std::string> stages_called(const LlmGateway& g, const std::string& id) {
    std::vector<std::string> out;
    for (const auto& r : g.calls_for(id)) out.push_back(r.stage);
    return out;
}

}  // namespace

TEST_CASE("variable inference keeps names on reported lines") {
    Live live(fixture_script());
    const auto inferred = infer_variable_names(fixture_case("numid-bypass"), fixtures::corpus_index(), live.gateway,
                                               settings());
    CHECK_FALSE(inferred.fallback);
    REQUIRE(inferred.source_vars.size() == 1);
    CHECK(inferred.source_vars[0] == SourceVar{"id", "snd_ctl_elem_id.index", 85});
    CHECK(describe_tainted_value(inferred, fixture_case("numid-bypass")) == "id (field snd_ctl_elem_id.index, line 85)");
    CHECK(stages_called(live.gateway, "numid-bypass") == std::vector<std::string>{"var_infer", "var_infer_summarize"});
}

TEST_CASE("variable inference falls back to the report descriptor") {
    Live live(fixture_script());
    const TaintReport& r = fixture_case("secia-uncertain");
    const auto inferred = infer_variable_names(r, fixtures::corpus_index(), live.gateway, settings());
    CHECK(inferred.fallback);
    CHECK(describe_tainted_value(inferred, r) == "depth");

    Live broken(json{{"*", {{"var_infer", {{"repeat", "notes"}}}, {"var_infer_summarize", {{"repeat", "no tags"}}}}}});
    const auto failed = infer_variable_names(r, fixtures::corpus_index(), broken.gateway, settings());
    CHECK(failed.fallback);
    CHECK(failed.notes.find("inference failed") != std::string::npos);
    // one reformat retry after the unparsable summary
    CHECK(stages_called(broken.gateway, r.case_id).size() == 3);
}

TEST_CASE("SecIA votes are tallied and ties go to potential_bug") {
    Live live(fixture_script());
    const TaintReport& r = fixture_case("secia-split");
    const InferredTaint inferred{r.case_id, {}, "", true};
    const auto a = assess_impact(r, inferred, fixtures::corpus_index(), live.gateway, settings());
    CHECK(a.verdict.label == SeciaLabel::PotentialBug);
    CHECK(a.tally.at(SeciaLabel::PotentialBug) == 2);
    CHECK(a.tally.at(SeciaLabel::NotABug) == 1);
    CHECK(a.verdict.vulns.at(0).type == "out_of_bound_access");  // from the first agreeing vote
    REQUIRE(a.critical_ops.size() == 1);
    CHECK(a.critical_ops[0] == CriticalOp{"dev = &misc_devices[misc_count++];", 35});

    Live tie(json{{"*", {{"secia", {{"repeat", "analysis"}}},
                         {"secia_summarize",
                          {{"votes",
                            {{"<bug_eval>not_a_bug</bug_eval>"},
                             {"<bug_eval>uncertain</bug_eval>"},
                             {"<bug_eval>potential_bug</bug_eval>"}}}}}}}});
    CHECK(assess_impact(r, inferred, fixtures::corpus_index(), tie.gateway, settings()).verdict.label ==
          SeciaLabel::PotentialBug);

    Live silent(json{{"*", {{"secia", {{"repeat", "analysis"}}}, {"secia_summarize", {{"repeat", "?"}}}}}});
    const auto failed = assess_impact(r, inferred, fixtures::corpus_index(), silent.gateway, settings());
    CHECK(failed.verdict.label == SeciaLabel::Uncertain);
    CHECK(failed.tally.at(SeciaLabel::Uncertain) == 3);
}

TEST_CASE("the filter drops only not_a_bug") {
    ImpactAssessment a, b, c;
    a.case_id = "a";
    a.verdict.label = SeciaLabel::NotABug;
    b.case_id = "b";
    b.verdict.label = SeciaLabel::Uncertain;
    c.case_id = "c";
    c.verdict.label = SeciaLabel::PotentialBug;
    const FilterResult f = filter_cases({a, b, c});
    REQUIRE(f.proceed.size() == 2);
    CHECK(f.proceed[0].case_id == "b");
    CHECK(f.proceed[1].case_id == "c");
    REQUIRE(f.eliminated.size() == 1);
    CHECK(f.eliminated[0].case_id == "a");
}

TEST_CASE("ConA runs all steps in one conversation, step 3 once per handler") {
    Live live(fixture_script());
    const TaintReport& r = fixture_case("fig2-check-x");
    const InferredTaint inferred{r.case_id, {{"req", "demo_req.x", 47}}, "", false};
    const ConaOutcome out = run_cona(r, inferred, fixtures::corpus_index(), live.gateway, settings());
    CHECK(out.verdict == FinalVerdict::StillABug);
    CHECK(out.chosen_vote == 0);
    REQUIRE(out.traces.size() == 3);
    const ConaTrace& t = out.traces[0];
    CHECK(t.step1.size() == 2);
    CHECK(t.step2.size() == 2);
    REQUIRE(t.step3.size() == 2);
    CHECK(t.step3.at("check_x").size() == 4);
    CHECK(t.step3.at("check_x")[0].postcondition == "x in (-inf, +inf)");
    CHECK(t.rationale.find("x == 100") != std::string::npos);

    // the summary request carries the whole vote-0 conversation
    std::vector<std::string> seen;
    for (const auto& rec : live.gateway.calls_for(r.case_id))
        if (rec.vote_index == 0) seen.push_back(rec.stage);
    CHECK(seen == std::vector<std::string>{"cona1", "cona1", "cona2", "cona2", "cona3", "cona3", "cona4",
                                           "cona_summarize"});
}

TEST_CASE("ConA prompts name the constraint and flag an empty step 2") {
    const TaintReport& r = fixture_case("fig2-check-x");
    Live live(fixture_script());
    const auto s = settings(1);
    ConaSession session(r, "x", fixtures::corpus_index(), live.gateway, s, 0);
    run_cona_once(session);
    int headers = 0;
    for (const auto& m : session.conversation.messages())
        if (m.role == Role::User && m.content.rfind(kConstraintHeader, 0) == 0) ++headers;
    CHECK(headers == 2);

    const TaintReport& bare = fixture_case("tlb-nocheck");
    ConaSession none(bare, "count", fixtures::corpus_index(), live.gateway, s, 0);
    const ConaTrace t = run_cona_once(none);
    CHECK(t.step2.empty());
    CHECK(t.step3.empty());
    bool flagged = false;
    for (const auto& m : none.conversation.messages())
        flagged = flagged || m.content.rfind(kNoConstraintsHeader, 0) == 0;
    CHECK(flagged);
}

TEST_CASE("ConA ties resolve toward still_a_bug and failed votes count as uncertain") {
    Live live(fixture_script());
    const TaintReport& r = fixture_case("tie-break");
    const InferredTaint inferred{r.case_id, {}, "", true};
    const ConaOutcome out = run_cona(r, inferred, fixtures::corpus_index(), live.gateway, settings());
    CHECK(out.votes == std::vector<FinalVerdict>{FinalVerdict::Eliminated, FinalVerdict::StillABug,
                                                 FinalVerdict::Uncertain});
    CHECK(out.verdict == FinalVerdict::StillABug);
    CHECK(out.chosen_vote == 1);

    Live empty(json::object());
    const ConaOutcome failed = run_cona(r, inferred, fixtures::corpus_index(), empty.gateway, settings());
    CHECK(failed.verdict == FinalVerdict::Uncertain);
    CHECK_FALSE(failed.traces[0].error.empty());
}

TEST_CASE("a malformed step answer gets one reformat request") {
    Live live(fixture_script());
    const TaintReport& r = fixture_case("copy-validated");
    const InferredTaint inferred{r.case_id, {}, "", true};
    const ConaOutcome out = run_cona(r, inferred, fixtures::corpus_index(), live.gateway, settings(1));
    CHECK(out.verdict == FinalVerdict::Eliminated);
    REQUIRE(out.traces[0].step2.size() == 1);
    CHECK(out.traces[0].step2[0].handler_func == "demo_validate_len");
}
