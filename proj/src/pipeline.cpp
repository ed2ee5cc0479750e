#include "triage/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "triage/code_index.hpp"
#include "triage/error.hpp"
#include "triage/majority_vote.hpp"

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(FinalLabel label) {
    switch (label) {
        case FinalLabel::Positive: return "positive";
        case FinalLabel::Negative: return "negative";
        case FinalLabel::UncertainPositive: return "uncertain_positive";
    }
    return "unknown";
}

FinalLabel final_label_from_string(std::string_view text) {
    if (text == "positive") return FinalLabel::Positive;
    if (text == "negative") return FinalLabel::Negative;
    if (text == "uncertain_positive") return FinalLabel::UncertainPositive;
    throw ParseError("unknown final label '" + std::string(text) + "'");
}

FinalLabel label_for_verdict(FinalVerdict verdict) {
    switch (verdict) {
        case FinalVerdict::StillABug:
        case FinalVerdict::LikelyUnsafe: return FinalLabel::Positive;
        case FinalVerdict::Eliminated:
        case FinalVerdict::LikelySafe:
        case FinalVerdict::NotExploitable: return FinalLabel::Negative;
        case FinalVerdict::Uncertain: return FinalLabel::UncertainPositive;
    }
    return FinalLabel::UncertainPositive;
}

FinalLabel map_final_label(std::optional<SeciaLabel> secia, std::optional<FinalVerdict> verdict) {
    if (secia == SeciaLabel::NotABug) return FinalLabel::Negative;
    if (verdict) return label_for_verdict(*verdict);
    return FinalLabel::UncertainPositive;
}

// ---- config ----

void RunConfig::normalize() {
    if (ablation.simple_prompt) ablation.sag = false;
    model.validate();
    budget.validate();
    if (function_first_part_lines < 1) throw Error("function_first_part_lines must be positive");
    if (workers < 1) throw Error("workers must be at least 1");
    if (provider.attempts < 1) throw Error("provider.attempts must be at least 1");
    if (provider.backoff_ms < 0) throw Error("provider.backoff_ms must not be negative");
    if (provider.requests_per_second < 0) throw Error("provider.requests_per_second must not be negative");
    if (!rates.count(model.model_id)) throw Error("no token rates configured for model '" + model.model_id + "'");
}

std::string RunConfig::name() const {
    std::string n = ablation.simple_prompt ? "simple_prompt" : (ablation.sag ? "full" : "no_sag");
    if (!ablation.ac_hypo) n += "_no_ac_hypo";
    return n;
}

AnalysisSettings RunConfig::analysis_settings(std::shared_ptr<const PromptLibrary> prompts) const {
    AnalysisSettings s;
    s.prompts = std::move(prompts);
    s.model = model;
    s.budget = budget;
    s.render.ac_hypo = ablation.ac_hypo;
    s.render.sag = ablation.sag && !ablation.simple_prompt;
    s.render.few_shot = few_shot;
    s.function_first_part_lines = function_first_part_lines;
    return s;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    if (!j.is_object()) throw ParseError("run config must be a JSON object");
    try {
        if (auto m = j.find("model"); m != j.end()) {
            c.model.model_id = m->value("model_id", c.model.model_id);
            c.model.temperature = m->value("temperature", c.model.temperature);
            c.model.max_tokens = m->value("max_tokens", c.model.max_tokens);
            c.model.vote_count = m->value("vote_count", c.model.vote_count);
        }
        if (auto b = j.find("budget"); b != j.end()) {
            c.budget.max_rounds = b->value("max_rounds", c.budget.max_rounds);
            c.budget.max_total_snippet_chars = b->value("max_total_snippet_chars", c.budget.max_total_snippet_chars);
        }
        if (auto a = j.find("ablation"); a != j.end()) {
            c.ablation.ac_hypo = a->value("ac_hypo", c.ablation.ac_hypo);
            c.ablation.sag = a->value("sag", c.ablation.sag);
            c.ablation.simple_prompt = a->value("simple_prompt", c.ablation.simple_prompt);
        }
        if (auto p = j.find("provider"); p != j.end()) {
            c.provider.base_url_env = p->value("base_url_env", c.provider.base_url_env);
            c.provider.api_key_env = p->value("api_key_env", c.provider.api_key_env);
            c.provider.attempts = p->value("attempts", c.provider.attempts);
            c.provider.backoff_ms = p->value("backoff_ms", c.provider.backoff_ms);
            c.provider.requests_per_second = p->value("requests_per_second", c.provider.requests_per_second);
        }
        if (j.contains("rates")) {
            for (auto& [model, r] : rates_from_json(j.at("rates"))) c.rates[model] = r;
        }
        c.few_shot = j.value("few_shot", c.few_shot);
        c.function_first_part_lines = j.value("function_first_part_lines", c.function_first_part_lines);
        c.workers = j.value("workers", c.workers);
        c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
        c.corpus_root = j.value("corpus", c.corpus_root);
        c.reports_path = j.value("reports", c.reports_path);
        if (j.contains("mode")) c.mode = gateway_mode_from_string(j.at("mode").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json rates_j = json::object();
    for (const auto& [m, r] : rates)
        rates_j[m] = {{"prompt_per_token", r.prompt_per_token}, {"completion_per_token", r.completion_per_token}};
    return {
        {"model",
         {{"model_id", model.model_id},
          {"temperature", model.temperature},
          {"max_tokens", model.max_tokens},
          {"vote_count", model.vote_count}}},
        {"budget", {{"max_rounds", budget.max_rounds}, {"max_total_snippet_chars", budget.max_total_snippet_chars}}},
        {"ablation",
         {{"ac_hypo", ablation.ac_hypo}, {"sag", ablation.sag}, {"simple_prompt", ablation.simple_prompt}}},
        {"provider",
         {{"base_url_env", provider.base_url_env},
          {"api_key_env", provider.api_key_env},
          {"attempts", provider.attempts},
          {"backoff_ms", provider.backoff_ms},
          {"requests_per_second", provider.requests_per_second}}},
        {"rates", rates_j},
        {"few_shot", few_shot},
        {"function_first_part_lines", function_first_part_lines},
        {"workers", workers},
        {"prompts_dir", prompts_dir},
        {"corpus", corpus_root},
        {"reports", reports_path},
        {"mode", std::string(triage::to_string(mode))},
    };
}

// ---- stages ----

SimpleOutcome run_simple(const TaintReport& report, const InferredTaint& inferred, const SymbolIndex& index,
                         LlmGateway& gateway, const AnalysisSettings& settings) {
    const PromptLibrary& lib = settings.library();
    CaseContext ctx{&report, describe_tainted_value(inferred, report), settings.function_first_part_lines};
    const std::string question = lib.render(Stage::Simple, ctx, index, settings.render);
    const std::string summary = lib.render(Stage::ConASummarize, ctx, index, settings.render);
    auto run_once = [&](int vote) {
        StageCall call{gateway, settings, report.case_id, vote};
        Conversation conv;
        conv.add_user(question);
        call.ask(conv, Stage::Simple);
        conv.add_user(summary);
        const RequestTag tag{report.case_id, "simple_summarize", vote};
        Completion c = gateway.complete(conv, settings.model, tag);
        conv.add_assistant(c.message.content);
        try {
            return parse_final_res(c.message.content);
        } catch (const ParseError& e) {
            conv.add_user(reformat_request("<final_res>still_a_bug</final_res>", e.what()));
            Completion again = gateway.complete(conv, settings.model, tag);
            return parse_final_res(again.message.content);
        }
    };
    auto vote = majority_vote<FinalVerdict>(run_once, settings.model.vote_count, FinalVerdict::Uncertain,
                                            [](FinalVerdict v) { return conservative_rank(v); });
    return {vote.verdict, vote.tally, vote.votes};
}

CaseResult run_case(const TaintReport& report, const RunConfig& config, const SymbolIndex& index,
                    LlmGateway& gateway, const AnalysisSettings& settings) {
    CaseResult r;
    r.case_id = report.case_id;
    try {
        r.inferred = infer_variable_names(report, index, gateway, settings);
        if (config.ablation.simple_prompt) {
            r.simple = run_simple(report, r.inferred, index, gateway, settings);
            r.final_label = map_final_label(std::nullopt, r.simple->verdict);
        } else {
            r.secia = assess_impact(report, r.inferred, index, gateway, settings);
            if (r.secia->verdict.label != SeciaLabel::NotABug)
                r.cona = run_cona(report, r.inferred, index, gateway, settings);
            r.final_label = map_final_label(r.secia->verdict.label,
                                            r.cona ? std::optional<FinalVerdict>(r.cona->verdict) : std::nullopt);
        }
    } catch (const RenderError& e) {
        r.final_label = FinalLabel::UncertainPositive;
        r.error = std::string("unanalyzable: ") + e.what();
    } catch (const std::exception& e) {
        r.final_label = FinalLabel::UncertainPositive;
        r.error = e.what();
    }

    const auto calls = gateway.calls_for(report.case_id);
    for (const auto& c : calls) {
        r.transcripts.push_back({c.stage, c.vote_index, c.request_hash});
        r.prompt_tokens += c.prompt_tokens;
        r.completion_tokens += c.completion_tokens;
    }
    r.cost = estimate_cost(calls, config.rates);
    return r;
}

BatchOutput run_batch(const std::vector<TaintReport>& reports, const RunConfig& config, const SymbolIndex& index,
                      LlmGateway& gateway, const AnalysisSettings& settings) {
    BatchOutput out;
    out.results.resize(reports.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next++; i < reports.size(); i = next++)
            out.results[i] = run_case(reports[i], config, index, gateway, settings);
    };
    const size_t n = std::min<size_t>(static_cast<size_t>(std::max(config.workers, 1)), std::max<size_t>(reports.size(), 1));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    std::sort(out.results.begin(), out.results.end(),
              [](const CaseResult& a, const CaseResult& b) { return a.case_id < b.case_id; });

    out.summary.cases = out.results.size();
    for (auto label : {FinalLabel::Positive, FinalLabel::Negative, FinalLabel::UncertainPositive})
        out.summary.label_counts[label] = 0;
    for (const auto& r : out.results) {
        ++out.summary.label_counts[r.final_label];
        out.summary.prompt_tokens += r.prompt_tokens;
        out.summary.completion_tokens += r.completion_tokens;
        out.summary.total_cost += r.cost;
        if (!r.error.empty()) ++out.summary.errors;
    }
    return out;
}

// ---- output ----

namespace {

template <class K>
json tally_json(const std::map<K, int>& tally) {
    json t = json::object();
    for (const auto& [k, n] : tally) t[std::string(to_string(k))] = n;
    return t;
}

template <class K>
json votes_json(const std::vector<K>& votes) {
    json v = json::array();
    for (const auto& k : votes) v.push_back(std::string(to_string(k)));
    return v;
}

json trace_json(const ConaTrace& t) {
    json step1 = json::array(), step2 = json::array(), step3 = json::object();
    for (const auto& p : t.step1)
        step1.push_back({{"type", std::string(to_string(p.kind))}, {"condition", p.condition}, {"context", p.context}});
    for (const auto& c : t.step2)
        step2.push_back(
            {{"type", std::string(to_string(c.kind))}, {"handler_func", c.handler_func}, {"context", c.context}});
    for (const auto& [handler, pairs] : t.step3) {
        json ps = json::array();
        for (const auto& p : pairs)
            ps.push_back({{"precondition", p.precondition}, {"postcondition", p.postcondition}, {"context", p.context}});
        step3[handler] = ps;
    }
    json j = {{"step1", step1}, {"step2", step2}, {"step3", step3}, {"rationale", t.rationale}};
    j["verdict"] = t.verdict ? json(std::string(to_string(*t.verdict))) : json(nullptr);
    if (!t.error.empty()) j["error"] = t.error;
    return j;
}

std::string excerpt(const std::string& text, size_t limit) {
    std::string flat;
    for (char c : text) flat += (c == '\n' || c == '\r') ? ' ' : c;
    if (flat.size() <= limit) return flat;
    return flat.substr(0, limit) + "...";
}

}  // namespace

json to_json(const CaseResult& r) {
    json vars = json::array();
    for (const auto& v : r.inferred.source_vars) vars.push_back({{"name", v.name}, {"field", v.field}, {"line", v.line}});
    json j = {
        {"case_id", r.case_id},
        {"final_label", std::string(to_string(r.final_label))},
        {"inferred", {{"source_vars", vars}, {"fallback", r.inferred.fallback}}},
        {"prompt_tokens", r.prompt_tokens},
        {"completion_tokens", r.completion_tokens},
        {"cost", r.cost},
    };
    if (r.secia) {
        json vulns = json::array();
        for (const auto& v : r.secia->verdict.vulns) vulns.push_back({{"type", v.type}, {"desc", v.description}});
        json ops = json::array();
        for (const auto& op : r.secia->critical_ops) ops.push_back({{"text", op.text}, {"line", op.line}});
        j["secia"] = {{"verdict", std::string(to_string(r.secia->verdict.label))},
                      {"vulns", vulns},
                      {"critical_ops", ops},
                      {"ac_hypo", r.secia->ac_hypo_applied},
                      {"tally", tally_json(r.secia->tally)},
                      {"votes", votes_json(r.secia->votes)}};
    }
    if (r.cona) {
        json traces = json::array();
        for (const auto& t : r.cona->traces) traces.push_back(trace_json(t));
        j["cona"] = {{"verdict", std::string(to_string(r.cona->verdict))},
                     {"tally", tally_json(r.cona->tally)},
                     {"votes", votes_json(r.cona->votes)},
                     {"chosen_vote", r.cona->chosen_vote},
                     {"traces", traces}};
    }
    if (r.simple) {
        j["simple"] = {{"verdict", std::string(to_string(r.simple->verdict))},
                       {"tally", tally_json(r.simple->tally)},
                       {"votes", votes_json(r.simple->votes)}};
    }
    if (!r.error.empty()) j["error"] = r.error;
    json refs = json::array();
    for (const auto& t : r.transcripts)
        refs.push_back({{"stage", t.stage}, {"vote_index", t.vote_index}, {"request_hash", t.request_hash}});
    j["transcripts"] = refs;
    return j;
}

json to_json(const RunSummary& s) {
    return {{"cases", s.cases},
            {"labels", tally_json(s.label_counts)},
            {"prompt_tokens", s.prompt_tokens},
            {"completion_tokens", s.completion_tokens},
            {"total_cost", s.total_cost},
            {"errors", s.errors}};
}

std::string results_jsonl(const std::vector<CaseResult>& results) {
    std::string out;
    for (const auto& r : results) out += to_json(r).dump() + "\n";
    return out;
}

std::string render_markdown(const BatchOutput& output, const std::string& config_name) {
    std::ostringstream md;
    const auto& s = output.summary;
    md << "# Triage report (" << config_name << ")\n\n";
    md << "| cases | positive | uncertain_positive | negative | errors | prompt tokens | completion tokens | cost (USD) |\n";
    md << "|---:|---:|---:|---:|---:|---:|---:|---:|\n";
    char cost[32];
    std::snprintf(cost, sizeof cost, "%.4f", s.total_cost);
    md << "| " << s.cases << " | " << s.label_counts.at(FinalLabel::Positive) << " | "
       << s.label_counts.at(FinalLabel::UncertainPositive) << " | " << s.label_counts.at(FinalLabel::Negative) << " | "
       << s.errors << " | " << s.prompt_tokens << " | " << s.completion_tokens << " | " << cost << " |\n";

    auto section = [&](const char* title, auto&& keep) {
        md << "\n## " << title << "\n\n";
        bool any = false;
        for (const auto& r : output.results) {
            if (!keep(r)) continue;
            any = true;
            md << "### " << r.case_id << " (" << to_string(r.final_label) << ")\n\n";
            if (r.secia) md << "- SecIA: " << to_string(r.secia->verdict.label) << "\n";
            if (r.cona) {
                md << "- ConA: " << to_string(r.cona->verdict) << "\n";
                if (r.cona->chosen_vote >= 0) {
                    const auto& t = r.cona->traces[static_cast<size_t>(r.cona->chosen_vote)];
                    if (!t.rationale.empty()) md << "- Reasoning: " << excerpt(t.rationale, 300) << "\n";
                }
            }
            if (r.simple) md << "- Simple prompt: " << to_string(r.simple->verdict) << "\n";
            if (!r.error.empty()) md << "- Error: " << r.error << "\n";
            md << "\n";
        }
        if (!any) md << "None.\n\n";
    };
    section("Positives", [](const CaseResult& r) { return r.final_label != FinalLabel::Negative; });
    section("Negatives", [](const CaseResult& r) { return r.final_label == FinalLabel::Negative; });
    std::string text = md.str();
    while (text.size() > 1 && text[text.size() - 1] == '\n' && text[text.size() - 2] == '\n') text.pop_back();
    return text;
}

void emit_report(const BatchOutput& output, const std::string& config_name, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream f(out_dir / name, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + (out_dir / name).string());
        f << text;
    };
    write("results.jsonl", results_jsonl(output.results));
    write("report.md", render_markdown(output, config_name));
    json summary = to_json(output.summary);
    summary["config"] = config_name;
    write("summary.json", summary.dump(2) + "\n");
}

std::vector<std::pair<std::string, FinalLabel>> read_result_labels(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::pair<std::string, FinalLabel>> out;
    std::string line;
    size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            out.emplace_back(j.at("case_id").get<std::string>(),
                             final_label_from_string(j.at("final_label").get<std::string>()));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace triage
