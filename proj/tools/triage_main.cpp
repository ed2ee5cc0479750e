#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "triage/code_index.hpp"
#include "triage/error.hpp"
#include "triage/eval.hpp"
#include "triage/http_backend.hpp"
#include "triage/llm_gateway.hpp"
#include "triage/pipeline.hpp"
#include "triage/prompt_engine.hpp"
#include "triage/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace triage;

namespace {

SymbolIndex open_index(const std::string& corpus, const std::string& cache) {
    if (!cache.empty()) return load_or_build_index(corpus, cache);
    return SymbolIndex::build(corpus);
}

std::vector<TaintReport> open_reports(const std::string& path, const std::string& sarif_map, const SymbolIndex& index) {
    if (!sarif_map.empty()) {
        SarifImport imported = adapt_sarif(path, load_detector_mapping(sarif_map), &index);
        for (const auto& w : imported.warnings) std::cerr << "warning: " << w << "\n";
        return imported.reports;
    }
    return parse_report_file(path);
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

struct RunArgs {
    std::string reports, corpus, config, mode = "replay", out = "triage-out", transcripts, script, index_cache,
        prompts, sarif_map;
    int votes = 0, workers = 0;
    bool no_ac_hypo = false, no_sag = false, simple_prompt = false;
};

int cmd_run(const RunArgs& a) {
    RunConfig config = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
    if (!a.reports.empty()) config.reports_path = a.reports;
    if (!a.corpus.empty()) config.corpus_root = a.corpus;
    if (!a.prompts.empty()) config.prompts_dir = a.prompts;
    config.mode = gateway_mode_from_string(a.mode);
    if (a.votes > 0) config.model.vote_count = a.votes;
    if (a.workers > 0) config.workers = a.workers;
    if (a.no_ac_hypo) config.ablation.ac_hypo = false;
    if (a.no_sag) config.ablation.sag = false;
    if (a.simple_prompt) config.ablation.simple_prompt = true;
    config.normalize();
    if (config.reports_path.empty()) throw Error("no reports given (--reports or \"reports\" in the config)");
    if (config.corpus_root.empty()) throw Error("no corpus given (--corpus or \"corpus\" in the config)");

    const SymbolIndex index = open_index(config.corpus_root, a.index_cache);
    for (const auto& w : index.warnings()) std::cerr << "warning: " << w << "\n";
    const auto reports = open_reports(config.reports_path, a.sarif_map, index);
    for (const auto& r : reports)
        for (const auto& w : validate_report(r, index)) std::cerr << "warning: " << r.case_id << ": " << w << "\n";

    auto prompts = std::make_shared<const PromptLibrary>(
        config.prompts_dir.empty() ? PromptLibrary::load_default() : PromptLibrary::load(config.prompts_dir));
    const AnalysisSettings settings = config.analysis_settings(prompts);

    GatewayOptions options{config.mode, config.provider.attempts, config.provider.backoff_ms,
                           config.provider.requests_per_second};
    std::shared_ptr<ChatBackend> backend;
    std::shared_ptr<TranscriptStore> replay_source, sink;
    const fs::path out_dir = a.out;
    if (config.mode == GatewayMode::Replay) {
        const fs::path source = a.transcripts.empty() ? out_dir / "transcripts" : fs::path(a.transcripts);
        replay_source = TranscriptStore::load(source);
    } else {
        if (!a.script.empty()) {
            backend = ScriptedBackend::from_file(a.script);
        } else {
            backend = std::make_shared<HttpChatBackend>(
                HttpChatBackend::from_environment(config.provider.base_url_env, config.provider.api_key_env));
        }
        if (config.mode == GatewayMode::Record) {
            const fs::path file =
                a.transcripts.empty() ? out_dir / "transcripts" / "transcripts.jsonl" : fs::path(a.transcripts);
            if (fs::exists(file)) fs::remove(file);
            sink = TranscriptStore::open_for_append(file);
        }
    }
    LlmGateway gateway(options, backend, replay_source, sink);
    const BatchOutput output = run_batch(reports, config, index, gateway, settings);
    emit_report(output, config.name(), out_dir);

    const auto& s = output.summary;
    std::cout << config.name() << ": " << s.cases << " cases, " << s.label_counts.at(FinalLabel::Positive)
              << " positive, " << s.label_counts.at(FinalLabel::UncertainPositive) << " uncertain_positive, "
              << s.label_counts.at(FinalLabel::Negative) << " negative, " << s.errors << " errors\n";
    std::cout << "wrote " << (out_dir / "results.jsonl").string() << "\n";
    return 0;
}

int cmd_eval(const std::string& results, const std::string& truth_path, const std::string& out,
             const std::vector<std::string>& compare, const std::string& row_label) {
    const GroundTruth truth = load_ground_truth(truth_path);
    json report = json::object();
    std::vector<std::pair<std::string, MetricsSummary>> rows;
    if (!results.empty()) rows.emplace_back("results", compute_metrics(read_result_labels(results), truth));
    for (const auto& spec : compare) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw Error("--compare expects name=path, got '" + spec + "'");
        rows.emplace_back(spec.substr(0, eq), compute_metrics(read_result_labels(spec.substr(eq + 1)), truth));
    }
    if (rows.empty()) throw Error("nothing to evaluate (--results or --compare)");
    for (const auto& [name, m] : rows) {
        report[name] = to_json(m);
        for (const auto& id : m.unscored) std::cerr << "warning: " << name << ": no result for case " << id << "\n";
    }
    std::string text = metrics_table(rows);
    if (rows.size() > 1) text += "\n" + compare_configs(rows, row_label);
    std::cout << text;
    if (!out.empty()) write_file(out, report.dump(2) + "\n");
    return 0;
}

int cmd_cost(const std::string& transcripts, const std::string& config_path) {
    RunConfig config = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    const auto records = TranscriptStore::load(transcripts)->records();
    long prompt = 0, completion = 0;
    for (const auto& r : records) {
        prompt += r.prompt_tokens;
        completion += r.completion_tokens;
    }
    const double cost = estimate_cost(records, config.rates);
    std::cout << records.size() << " requests, " << prompt << " prompt tokens, " << completion
              << " completion tokens, cost " << cost << " USD\n";
    return 0;
}

int cmd_index(const std::string& corpus, const std::string& out) {
    const SymbolIndex index = SymbolIndex::build(corpus);
    for (const auto& w : index.warnings()) std::cerr << "warning: " << w << "\n";
    size_t functions = 0, structs = 0, globals = 0;
    for (const auto& [_, v] : index.functions()) functions += v.size();
    for (const auto& [_, v] : index.structs()) structs += v.size();
    for (const auto& [_, v] : index.globals()) globals += v.size();
    if (!out.empty()) save_index_cache(index, out);
    std::cout << functions << " functions, " << structs << " structs, " << globals << " globals\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Staged LLM triage of taint-style static analysis reports"};
    app.require_subcommand(1);

    std::string index_corpus, index_out;
    auto* index_cmd = app.add_subcommand("index", "Build the symbol index and write it as a cache file");
    index_cmd->add_option("--corpus", index_corpus, "Source tree root")->required();
    index_cmd->add_option("--out", index_out, "Cache file to write");

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Triage a batch of reports");
    run_cmd->add_option("--reports", run.reports, "Canonical JSON-lines reports (or SARIF with --sarif-map)");
    run_cmd->add_option("--corpus", run.corpus, "Source tree the reports refer to");
    run_cmd->add_option("--config", run.config, "Run config JSON");
    run_cmd->add_option("--mode", run.mode, "record, replay or live")
        ->check(CLI::IsMember({"record", "replay", "live"}));
    run_cmd->add_option("--votes", run.votes, "Votes per stage (odd)");
    run_cmd->add_flag("--no-ac-hypo", run.no_ac_hypo, "Drop the arbitrary-control assumption from SecIA");
    run_cmd->add_flag("--no-sag", run.no_sag, "Drop the structured analysis guidance blocks from ConA");
    run_cmd->add_flag("--simple-prompt", run.simple_prompt, "Ask one direct question instead of SecIA and ConA");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--workers", run.workers, "Concurrent cases");
    run_cmd->add_option("--transcripts", run.transcripts,
                        "Replay: transcript file or directory. Record: transcript file to write");
    run_cmd->add_option("--script", run.script, "Scripted responses instead of a provider (record/live)");
    run_cmd->add_option("--index-cache", run.index_cache, "Index cache file, rebuilt when stale");
    run_cmd->add_option("--prompts", run.prompts, "Prompt directory with manifest.json");
    run_cmd->add_option("--sarif-map", run.sarif_map, "Rule-id to detector mapping; reads --reports as SARIF");

    std::string eval_results, eval_truth, eval_out, eval_label = "model";
    std::vector<std::string> eval_compare;
    auto* eval_cmd = app.add_subcommand("eval", "Score results against ground truth");
    eval_cmd->add_option("--results", eval_results, "results.jsonl from a run");
    eval_cmd->add_option("--truth", eval_truth, "Ground truth JSON {case_id: bug|not_bug}")->required();
    eval_cmd->add_option("--out", eval_out, "Metrics JSON to write");
    eval_cmd->add_option("--compare", eval_compare, "Extra configurations as name=results.jsonl");
    eval_cmd->add_option("--label", eval_label, "Row label for the comparison table");

    std::string cost_transcripts, cost_config;
    auto* cost_cmd = app.add_subcommand("cost", "Estimate spend from transcripts");
    cost_cmd->add_option("--transcripts", cost_transcripts, "Transcript file or directory")->required();
    cost_cmd->add_option("--config", cost_config, "Run config JSON with rates");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*index_cmd) return cmd_index(index_corpus, index_out);
        if (*run_cmd) return cmd_run(run);
        if (*eval_cmd) return cmd_eval(eval_results, eval_truth, eval_out, eval_compare, eval_label);
        if (*cost_cmd) return cmd_cost(cost_transcripts, cost_config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
