#include <doctest.h>

#include <json.hpp>

#include "e2e.hpp"
#include "triage/error.hpp"
#include "triage/pipeline.hpp"

using namespace triage;
using nlohmann::json;

TEST_CASE("label mapping is total over SecIA and ConA outcomes") {
    const FinalVerdict verdicts[] = {FinalVerdict::StillABug,    FinalVerdict::Eliminated,     FinalVerdict::LikelySafe,
                                     FinalVerdict::LikelyUnsafe, FinalVerdict::NotExploitable, FinalVerdict::Uncertain};
    const std::map<FinalVerdict, FinalLabel> want{
        {FinalVerdict::StillABug, FinalLabel::Positive},       {FinalVerdict::LikelyUnsafe, FinalLabel::Positive},
        {FinalVerdict::Eliminated, FinalLabel::Negative},      {FinalVerdict::LikelySafe, FinalLabel::Negative},
        {FinalVerdict::NotExploitable, FinalLabel::Negative},  {FinalVerdict::Uncertain, FinalLabel::UncertainPositive},
    };
    for (auto v : verdicts) {
        CHECK(label_for_verdict(v) == want.at(v));
        CHECK(map_final_label(SeciaLabel::NotABug, v) == FinalLabel::Negative);
        CHECK(map_final_label(SeciaLabel::PotentialBug, v) == want.at(v));
        CHECK(map_final_label(SeciaLabel::Uncertain, v) == want.at(v));
        CHECK(map_final_label(std::nullopt, v) == want.at(v));
    }
    CHECK(map_final_label(SeciaLabel::NotABug, std::nullopt) == FinalLabel::Negative);
    CHECK(map_final_label(SeciaLabel::PotentialBug, std::nullopt) == FinalLabel::UncertainPositive);
    CHECK(map_final_label(std::nullopt, std::nullopt) == FinalLabel::UncertainPositive);
}

TEST_CASE("run configuration normalizes and round-trips") {
    RunConfig c;
    c.ablation.simple_prompt = true;
    c.normalize();
    CHECK_FALSE(c.ablation.sag);
    CHECK(c.name() == "simple_prompt");
    c.ablation.ac_hypo = false;
    CHECK(c.name() == "simple_prompt_no_ac_hypo");

    RunConfig d = RunConfig::from_json(json::parse(R"({"model": {"vote_count": 5}, "ablation": {"sag": false},
        "budget": {"max_rounds": 3}, "workers": 4})"));
    d.normalize();
    CHECK(d.model.vote_count == 5);
    CHECK(d.budget.max_rounds == 3);
    CHECK(d.name() == "no_sag");
    const RunConfig e = RunConfig::from_json(d.to_json());
    CHECK(e.to_json() == d.to_json());

    RunConfig bad;
    bad.model.vote_count = 2;
    CHECK_THROWS_AS(bad.normalize(), Error);
    RunConfig unpriced;
    unpriced.model.model_id = "mystery";
    CHECK_THROWS_AS(unpriced.normalize(), Error);
    CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"workers": "many"})")), ParseError);
}

TEST_CASE("an empty batch gives an empty result and a zero summary") {
    const RunConfig config = fixtures::e2e_config("full", 4);
    auto gateway = LlmGateway::replay(std::make_shared<TranscriptStore>());
    const BatchOutput out = run_batch({}, config, fixtures::corpus_index(), gateway,
                                      config.analysis_settings(fixtures::prompts()));
    CHECK(out.results.empty());
    CHECK(out.summary.cases == 0);
    CHECK(out.summary.total_cost == 0.0);
    CHECK(out.summary.label_counts.at(FinalLabel::Positive) == 0);
}

TEST_CASE("replayed fixture batches are identical across worker counts") {
    const BatchOutput one = fixtures::replay_fixture("full", 1);
    const BatchOutput four = fixtures::replay_fixture("full", 4);
    CHECK(results_jsonl(one.results) == results_jsonl(four.results));
    CHECK(render_markdown(one, "full") == render_markdown(four, "full"));
    for (size_t i = 1; i < one.results.size(); ++i) CHECK(one.results[i - 1].case_id < one.results[i].case_id);
}

TEST_CASE("case results follow the stage invariants") {
    const BatchOutput out = fixtures::replay_fixture("full", 2);
    std::map<std::string, const CaseResult*> by_id;
    for (const auto& r : out.results) by_id[r.case_id] = &r;

    const CaseResult& jiffies = *by_id.at("jiffies-timeout");
    CHECK(jiffies.final_label == FinalLabel::Negative);
    CHECK_FALSE(jiffies.cona);
    for (const auto& t : jiffies.transcripts) CHECK(t.stage.rfind("cona", 0) != 0);

    const CaseResult& fig2 = *by_id.at("fig2-check-x");
    CHECK(fig2.final_label == FinalLabel::Positive);
    REQUIRE(fig2.cona);
    CHECK(fig2.cona->verdict == FinalVerdict::StillABug);

    CHECK(by_id.at("tlb-assert")->final_label == FinalLabel::Negative);
    CHECK(by_id.at("numid-bypass")->final_label == FinalLabel::Positive);

    const CaseResult& missing = *by_id.at("missing-func");
    CHECK(missing.final_label == FinalLabel::UncertainPositive);
    CHECK(missing.error.rfind("unanalyzable: ", 0) == 0);
    CHECK(missing.transcripts.empty());

    const CaseResult& split = *by_id.at("secia-split");
    CHECK(split.secia->verdict.label == SeciaLabel::PotentialBug);
    CHECK(split.cona->verdict == FinalVerdict::Eliminated);

    long prompt = 0;
    double cost = 0;
    for (const auto& r : out.results) {
        prompt += r.prompt_tokens;
        cost += r.cost;
        CHECK(r.cost == doctest::Approx(r.prompt_tokens * 1.1e-6 + r.completion_tokens * 4.4e-6));
    }
    CHECK(out.summary.prompt_tokens == prompt);
    CHECK(out.summary.total_cost == doctest::Approx(cost));
    CHECK(out.summary.errors == 1);
}

TEST_CASE("markdown reports match the committed renderings") {
    for (const std::string mode : {"full", "nosag", "simple"}) {
        const BatchOutput out = fixtures::replay_fixture(mode, 1);
        const std::string name = fixtures::e2e_config(mode, 1).name();
        CHECK_MESSAGE(render_markdown(out, name) == fixtures::read(fixtures::e2e() / "golden" / mode / "report.md"),
                      mode);
    }
}

TEST_CASE("emitted files read back") {
    const BatchOutput out = fixtures::replay_fixture("simple", 1);
    fixtures::TempDir tmp("emit");
    emit_report(out, "simple_prompt", tmp.path());
    const auto labels = read_result_labels(tmp.path() / "results.jsonl");
    REQUIRE(labels.size() == out.results.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        CHECK(labels[i].first == out.results[i].case_id);
        CHECK(labels[i].second == out.results[i].final_label);
    }
    const json summary = json::parse(fixtures::read(tmp.path() / "summary.json"));
    CHECK(summary.at("cases") == out.results.size());
    CHECK(std::filesystem::exists(tmp.path() / "report.md"));
}

TEST_CASE("a replay miss degrades one case without stopping the batch") {
    const RunConfig config = fixtures::e2e_config("full", 2);
    const auto reports = parse_report_file(config.reports_path);
    // the no-sag transcripts do not answer full-configuration prompts
    auto gateway = LlmGateway::replay(TranscriptStore::load(fixtures::e2e() / "transcripts" / "nosag"));
    const BatchOutput out =
        run_batch(reports, config, fixtures::corpus_index(), gateway, config.analysis_settings(fixtures::prompts()));
    CHECK(out.results.size() == reports.size());
    for (const auto& r : out.results) {
        if (!r.cona) continue;
        CHECK(r.cona->verdict == FinalVerdict::Uncertain);
        CHECK(r.final_label == FinalLabel::UncertainPositive);
    }
}
