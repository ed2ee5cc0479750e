#pragma once

#include <memory>
#include <string>

#include "fixtures.hpp"
#include "triage/code_index.hpp"
#include "triage/pipeline.hpp"
#include "triage/report.hpp"

namespace fixtures {

/// The three configurations the fixture transcripts were recorded under.
inline triage::RunConfig e2e_config(const std::string& mode, int workers) {
    triage::RunConfig config;
    config.workers = workers;
    config.corpus_root = corpus().string();
    config.reports_path = (e2e() / "reports.jsonl").string();
    if (mode == "nosag") config.ablation.sag = false;
    if (mode == "simple") config.ablation.simple_prompt = true;
    config.normalize();
    return config;
}

inline const triage::SymbolIndex& corpus_index() {
    static const triage::SymbolIndex index = triage::SymbolIndex::build(corpus());
    return index;
}

inline std::shared_ptr<const triage::PromptLibrary> prompts() {
    static const auto lib = std::make_shared<const triage::PromptLibrary>(triage::PromptLibrary::load_default());
    return lib;
}

/// Replays the committed transcripts of `mode` ("full", "nosag", "simple").
inline triage::BatchOutput replay_fixture(const std::string& mode, int workers) {
    const triage::RunConfig config = e2e_config(mode, workers);
    const auto reports = triage::parse_report_file(config.reports_path);
    auto gateway = triage::LlmGateway::replay(triage::TranscriptStore::load(e2e() / "transcripts" / mode));
    return triage::run_batch(reports, config, corpus_index(), gateway, config.analysis_settings(prompts()));
}

}  // namespace fixtures
