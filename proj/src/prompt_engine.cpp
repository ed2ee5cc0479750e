#include "triage/prompt_engine.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "triage/code_index.hpp"
#include "triage/error.hpp"
#include "triage/xml_extract.hpp"

#ifndef TRIAGE_DEFAULT_PROMPTS_DIR
#define TRIAGE_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kArgMarker = "{}";
constexpr std::string_view kAgentMarker = "{AGENT PROMPTS HERE}";

constexpr std::array<std::pair<Stage, std::string_view>, 10> kStages{{
    {Stage::VarInfer, "var_infer"},
    {Stage::VarInferSummarize, "var_infer_summarize"},
    {Stage::SecIA, "secia"},
    {Stage::SecIASummarize, "secia_summarize"},
    {Stage::ConA1, "cona1"},
    {Stage::ConA2, "cona2"},
    {Stage::ConA3, "cona3"},
    {Stage::ConA4, "cona4"},
    {Stage::ConASummarize, "cona_summarize"},
    {Stage::Simple, "simple"},
}};

constexpr std::array<std::pair<ToolKind, std::string_view>, 4> kTools{{
    {ToolKind::FuncDef, "need_func_def"},
    {ToolKind::StructDef, "need_struct_def"},
    {ToolKind::Caller, "need_caller"},
    {ToolKind::GlobalVarDef, "need_global_var_def"},
}};

constexpr std::array<std::pair<SeciaLabel, std::string_view>, 3> kSeciaLabels{{
    {SeciaLabel::NotABug, "not_a_bug"},
    {SeciaLabel::PotentialBug, "potential_bug"},
    {SeciaLabel::Uncertain, "uncertain"},
}};

constexpr std::array<std::pair<FinalVerdict, std::string_view>, 6> kFinalVerdicts{{
    {FinalVerdict::StillABug, "still_a_bug"},
    {FinalVerdict::Eliminated, "eliminated"},
    {FinalVerdict::LikelySafe, "likely_safe"},
    {FinalVerdict::LikelyUnsafe, "likely_unsafe"},
    {FinalVerdict::NotExploitable, "not_exploitable"},
    {FinalVerdict::Uncertain, "uncertain"},
}};

template <class E, size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
    for (const auto& [v, name] : table)
        if (v == value) return name;
    return "unknown";
}

template <class E, size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name) {
    for (const auto& [v, n] : table)
        if (n == name) return v;
    return std::nullopt;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

size_t count_markers(std::string_view body) {
    size_t n = 0;
    for (size_t p = body.find(kArgMarker); p != std::string_view::npos; p = body.find(kArgMarker, p + kArgMarker.size()))
        ++n;
    return n;
}

/// Label text normalized for comparison: trimmed, quotes dropped, lowercase,
/// inner blanks as underscores.
std::string normalize_label(std::string_view raw) {
    std::string s = xml::trim(raw);
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\'' || c == '`') continue;
        if (std::isspace(static_cast<unsigned char>(c)) || c == '-') {
            if (!out.empty() && out.back() != '_') out += '_';
            continue;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

std::string require_element(std::string_view text, std::string_view tag) {
    auto el = xml::last_element(text, tag);
    if (!el) throw ParseError("missing <" + std::string(tag) + "> element");
    return *el;
}

std::string require_child(std::string_view text, std::string_view tag, std::string_view parent) {
    auto child = xml::child_text(text, tag);
    if (!child) throw ParseError("<" + std::string(parent) + "> lacks <" + std::string(tag) + ">");
    return *child;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

/// Applies the block markers, keeping the newline structure of kept lines.
std::string apply_blocks(std::string_view body, const RenderOptions& options, std::string_view few_shot) {
    std::string out;
    bool in_sag = false, in_hypo = false;
    for (std::string_view line : split_lines(body)) {
        if (line == "[[sag]]") { in_sag = true; continue; }
        if (line == "[[/sag]]") { in_sag = false; continue; }
        if (line == "[[ac_hypo]]") { in_hypo = true; continue; }
        if (line == "[[/ac_hypo]]") { in_hypo = false; continue; }
        if ((in_sag && !options.sag) || (in_hypo && !options.ac_hypo)) continue;
        if (line == "[[few_shot]]") {
            if (options.few_shot && !few_shot.empty()) {
                out += few_shot;
                if (out.back() != '\n') out += '\n';
            }
            continue;
        }
        out += line;
        out += '\n';
    }
    if (!body.empty() && body.back() != '\n' && !out.empty()) out.pop_back();
    return out;
}

const FunctionDef* pick_sink_def(const TaintReport& report, const std::vector<FunctionDef>& defs) {
    for (const auto& d : defs)
        if (d.file == report.sink_file && report.sink_line >= d.start_line && report.sink_line <= d.end_line) return &d;
    return defs.empty() ? nullptr : &defs.front();
}

std::string number_lines(std::string_view text, int first_line, int max_lines) {
    std::string out;
    int n = 0;
    for (std::string_view line : split_lines(text)) {
        if (n == max_lines) break;
        if (n) out += '\n';
        out += std::to_string(first_line + n) + ": ";
        out += line;
        ++n;
    }
    return out;
}

}  // namespace

std::string_view to_string(Stage stage) { return name_of(kStages, stage); }

Stage stage_from_string(std::string_view text) {
    if (auto s = value_of(kStages, text)) return *s;
    throw ParseError("unknown stage '" + std::string(text) + "'");
}

std::string_view to_string(ToolKind kind) { return name_of(kTools, kind); }

ToolKind tool_kind_from_string(std::string_view text) {
    if (auto k = value_of(kTools, text)) return *k;
    throw ParseError("unknown request type '" + std::string(text) + "'");
}

std::string_view to_string(SeciaLabel label) { return name_of(kSeciaLabels, label); }

SeciaLabel secia_label_from_string(std::string_view text) {
    if (auto l = value_of(kSeciaLabels, text)) return *l;
    throw ParseError("unknown bug_eval label '" + std::string(text) + "'");
}

int conservative_rank(SeciaLabel label) {
    switch (label) {
        case SeciaLabel::PotentialBug: return 0;
        case SeciaLabel::Uncertain: return 1;
        case SeciaLabel::NotABug: return 2;
    }
    return 3;
}

std::string_view to_string(FinalVerdict verdict) { return name_of(kFinalVerdicts, verdict); }

FinalVerdict final_verdict_from_string(std::string_view text) {
    if (auto v = value_of(kFinalVerdicts, text)) return *v;
    throw ParseError("unknown final_res label '" + std::string(text) + "'");
}

int conservative_rank(FinalVerdict verdict) {
    switch (verdict) {
        case FinalVerdict::StillABug: return 0;
        case FinalVerdict::LikelyUnsafe: return 1;
        case FinalVerdict::Uncertain: return 2;
        case FinalVerdict::LikelySafe: return 3;
        case FinalVerdict::NotExploitable: return 4;
        case FinalVerdict::Eliminated: return 5;
    }
    return 6;
}

std::string_view to_string(PreconditionKind kind) {
    return kind == PreconditionKind::DominateCondition ? "dominate_condition" : "guard_condition";
}

std::string_view to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::Validation: return "validation";
        case ConstraintKind::Sanitization: return "sanitization";
        case ConstraintKind::TypeConstraint: return "type_constraint";
    }
    return "unknown";
}

// ---- library ----

PromptLibrary PromptLibrary::load(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_text(manifest_path));
    } catch (const json::exception& e) {
        throw Error(manifest_path.string() + ": " + e.what());
    }
    PromptLibrary lib;
    lib.agent_protocol_ = read_text(dir / manifest.at("agent_protocol").get<std::string>());
    for (const auto& [name, entry] : manifest.at("stages").items()) {
        PromptTemplate t;
        t.stage = stage_from_string(name);
        t.body = read_text(dir / entry.at("file").get<std::string>());
        t.args = entry.value("args", std::vector<std::string>{});
        for (const auto& cb : entry.value("callbacks", std::vector<std::string>{}))
            t.callbacks.insert(tool_kind_from_string(cb));
        if (entry.contains("few_shot")) t.few_shot = read_text(dir / entry.at("few_shot").get<std::string>());
        const size_t markers = count_markers(t.body);
        if (markers != t.args.size())
            throw Error("prompt " + name + ": " + std::to_string(markers) + " placeholders but " +
                        std::to_string(t.args.size()) + " args");
        lib.templates_[t.stage] = std::move(t);
    }
    for (const auto& [stage, name] : kStages)
        if (!lib.templates_.count(stage)) throw Error("prompt manifest lacks stage " + std::string(name));
    return lib;
}

PromptLibrary PromptLibrary::load_default() { return load(TRIAGE_DEFAULT_PROMPTS_DIR); }

const PromptTemplate& PromptLibrary::get(Stage stage) const { return templates_.at(stage); }

std::string PromptLibrary::render(Stage stage, const CaseContext& ctx, const SymbolIndex& index,
                                  const RenderOptions& options) const {
    return triage::render(get(stage), ctx, index, options, agent_protocol_);
}

// ---- rendering ----

std::optional<std::string> sink_function_text(const TaintReport& report, const SymbolIndex& index,
                                              bool cut_after_sink) {
    if (report.call_chain.empty()) return std::nullopt;
    auto defs = index.get_func_def(report.sink_function());
    const FunctionDef* def = pick_sink_def(report, defs);
    if (def == nullptr) return std::nullopt;
    if (!cut_after_sink || def->file != report.sink_file || report.sink_line < def->start_line ||
        report.sink_line >= def->end_line)
        return def->text;
    auto lines = split_lines(def->text);
    const size_t keep = static_cast<size_t>(report.sink_line - def->start_line + 1);
    std::string out;
    for (size_t i = 0; i < keep && i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

std::string resolve_provider(std::string_view provider, const CaseContext& ctx, const SymbolIndex& index) {
    const std::string name(provider);
    const TaintReport* r = ctx.report;
    if (r == nullptr) throw RenderError(name + ": no report in case context");

    if (provider == "get_tainted_value") {
        if (!ctx.tainted_value.empty()) return ctx.tainted_value;
        if (r->tainted_value.empty()) throw RenderError(name + ": empty tainted value");
        return r->tainted_value;
    }
    if (provider == "get_bug_detector") return std::string(detector_description(r->detector));
    if (provider == "get_call_chain") {
        if (r->call_chain.empty()) throw RenderError(name + ": call chain is empty");
        return join(r->call_chain, " -> ");
    }
    if (provider == "get_function") {
        auto text = sink_function_text(*r, index, true);
        if (!text) throw RenderError(name + ": no definition for sink function");
        return *text;
    }
    if (provider == "get_function_first_part") {
        if (r->call_chain.empty()) throw RenderError(name + ": call chain is empty");
        auto defs = index.get_func_def(r->sink_function());
        const FunctionDef* def = pick_sink_def(*r, defs);
        if (def == nullptr) throw RenderError(name + ": no definition for " + r->sink_function());
        return number_lines(def->text, def->start_line, ctx.function_first_part_lines);
    }
    if (provider == "get_insts_from_ctx") {
        if (r->ir_dataflow.empty()) throw RenderError(name + ": no dataflow steps");
        std::string out;
        for (const auto& step : r->ir_dataflow) {
            if (!out.empty()) out += '\n';
            out += "line " + std::to_string(step.line) + ": " + step.note;
        }
        return out;
    }
    if (provider == "get_source_line_set") {
        std::vector<std::string> parts;
        for (int line : r->source_line_set) parts.push_back(std::to_string(line));
        return join(parts, ", ");
    }
    throw RenderError(name + ": unknown argument provider");
}

std::string render(const PromptTemplate& tmpl, const CaseContext& ctx, const SymbolIndex& index,
                   const RenderOptions& options, std::string_view agent_protocol) {
    std::vector<std::string> values;
    values.reserve(tmpl.args.size());
    for (const auto& provider : tmpl.args) values.push_back(resolve_provider(provider, ctx, index));

    const std::string body = apply_blocks(tmpl.body, options, tmpl.few_shot);
    std::string out;
    size_t arg = 0, pos = 0;
    while (pos < body.size()) {
        const size_t a = body.find(kArgMarker, pos);
        const size_t g = body.find(kAgentMarker, pos);
        const size_t next = std::min(a, g);
        if (next == std::string::npos) {
            out.append(body, pos);
            break;
        }
        out.append(body, pos, next - pos);
        if (next == g) {
            std::string_view proto = agent_protocol;
            if (!proto.empty() && proto.back() == '\n') proto.remove_suffix(1);
            out += proto;
            pos = next + kAgentMarker.size();
        } else {
            if (arg >= values.size()) throw RenderError("prompt " + std::string(to_string(tmpl.stage)) + ": too many placeholders");
            out += values[arg++];
            pos = next + kArgMarker.size();
        }
    }
    return out;
}

// ---- parsers ----

std::vector<ToolRequest> parse_requests(std::string_view response) {
    std::vector<ToolRequest> out;
    if (!xml::has_element(response, "requests")) return out;
    for (const auto& block : xml::all_elements(response, "requests")) {
        const auto requests = xml::all_elements(block, "request");
        if (requests.empty()) throw ParseError("<requests> holds no <request>");
        for (const auto& req : requests) {
            ToolRequest tr;
            tr.kind = tool_kind_from_string(normalize_label(require_child(req, "name", "request")));
            auto args = xml::last_element(req, "args");
            if (!args) throw ParseError("<request> lacks <args>");
            for (const auto& a : xml::all_elements(*args, "arg")) {
                std::string v = xml::trim(a);
                if (!v.empty()) tr.args.push_back(std::move(v));
            }
            if (tr.args.empty()) throw ParseError(std::string(to_string(tr.kind)) + " request without arguments");
            if (tr.kind == ToolKind::Caller && tr.args.size() != 1)
                throw ParseError("need_caller takes exactly one argument");
            out.push_back(std::move(tr));
        }
    }
    return out;
}

SeciaVerdict parse_bug_eval(std::string_view response) {
    const std::string body = require_element(response, "bug_eval");
    SeciaVerdict v;
    if (auto tv = xml::child_text(body, "tainted_var")) v.tainted_var = *tv;
    if (auto vulns = xml::last_element(body, "vulns")) {
        for (const auto& item : xml::all_elements(*vulns, "vuln")) {
            Vulnerability vuln;
            vuln.type = require_child(item, "type", "vuln");
            vuln.description = xml::child_text(item, "desc").value_or("");
            v.vulns.push_back(std::move(vuln));
        }
        v.label = v.vulns.empty() ? SeciaLabel::NotABug : SeciaLabel::PotentialBug;
        return v;
    }
    std::string text = body;
    if (auto p = text.find("<tainted_var"); p != std::string::npos) {
        auto q = text.find("</tainted_var>", p);
        if (q == std::string::npos) throw ParseError("missing </tainted_var> closing tag");
        text.erase(p, q + 14 - p);
    }
    const std::string label = normalize_label(text);
    if (label == "normal_code") {
        v.label = SeciaLabel::NotABug;
    } else {
        v.label = secia_label_from_string(label);
    }
    // The short form names no vulnerability; keep the label/vulns invariant.
    if (v.label == SeciaLabel::PotentialBug) v.vulns.push_back({"unspecified", ""});
    return v;
}

std::vector<SinkPrecondition> parse_sink_precondi(std::string_view response) {
    const std::string body = require_element(response, "sink_precondi");
    std::vector<SinkPrecondition> out;
    for (const auto& item : xml::all_elements(body, "precondi")) {
        SinkPrecondition p;
        const std::string type = normalize_label(require_child(item, "type", "precondi"));
        if (type == "dominate_condition") {
            p.kind = PreconditionKind::DominateCondition;
            p.context = xml::child_text(item, "dominated_sink").value_or("");
        } else if (type == "guard_condition") {
            p.kind = PreconditionKind::GuardCondition;
            p.context = xml::child_text(item, "guard_bypass").value_or("");
        } else {
            throw ParseError("unknown precondition type '" + type + "'");
        }
        p.condition = require_child(item, "condition", "precondi");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<RangeConstraint> parse_range_constraints(std::string_view response) {
    const std::string body = require_element(response, "range_constraints");
    std::vector<RangeConstraint> out;
    for (const auto& item : xml::all_elements(body, "constraint")) {
        RangeConstraint c;
        const std::string type = normalize_label(require_child(item, "type", "constraint"));
        if (type == "validation") c.kind = ConstraintKind::Validation;
        else if (type == "sanitization") c.kind = ConstraintKind::Sanitization;
        else if (type == "type_constraint") c.kind = ConstraintKind::TypeConstraint;
        else throw ParseError("unknown constraint type '" + type + "'");
        c.handler_func = require_child(item, "handler_func", "constraint");
        c.context = xml::child_text(item, "context").value_or("");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<ConditionPair> parse_condition_pairs(std::string_view response) {
    const std::string body = require_element(response, "range_constraint");
    const std::string pairs = require_element(body, "condition_pairs");
    std::vector<ConditionPair> out;
    for (const auto& item : xml::all_elements(pairs, "pair")) {
        ConditionPair p;
        p.precondition = require_child(item, "precondi", "pair");
        p.postcondition = require_child(item, "postcondi", "pair");
        p.context = xml::child_text(item, "context").value_or("");
        out.push_back(std::move(p));
    }
    return out;
}

FinalVerdict parse_final_res(std::string_view response) {
    return final_verdict_from_string(normalize_label(require_element(response, "final_res")));
}

std::vector<SourceVar> parse_tainted_vars(std::string_view response) {
    const std::string body = require_element(response, "tainted_vars");
    std::vector<SourceVar> out;
    for (const auto& item : xml::all_elements(body, "var")) {
        SourceVar v;
        v.name = require_child(item, "name", "var");
        if (v.name.empty()) throw ParseError("<var> has an empty <name>");
        v.field = xml::child_text(item, "field").value_or("");
        const std::string line = require_child(item, "line", "var");
        try {
            size_t used = 0;
            v.line = std::stoi(line, &used);
            if (used != line.size()) throw std::invalid_argument(line);
        } catch (const std::exception&) {
            throw ParseError("<line> is not a number: '" + line + "'");
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ---- serializers ----

std::string to_xml(const std::vector<ToolRequest>& requests) {
    std::string out = "<requests>\n";
    for (const auto& r : requests) {
        out += "  <request>\n    <name>" + std::string(to_string(r.kind)) + "</name>\n    <args>\n";
        for (const auto& a : r.args) out += "      <arg>" + a + "</arg>\n";
        out += "    </args>\n  </request>\n";
    }
    return out + "</requests>";
}

std::string to_xml(const SeciaVerdict& verdict) {
    if (verdict.vulns.empty() && verdict.tainted_var.empty())
        return "<bug_eval>" + std::string(to_string(verdict.label)) + "</bug_eval>";
    std::string out = "<bug_eval>\n";
    if (!verdict.tainted_var.empty()) out += "    <tainted_var>" + verdict.tainted_var + "</tainted_var>\n";
    if (verdict.vulns.empty()) return out + "    " + std::string(to_string(verdict.label)) + "\n</bug_eval>";
    out += "    <vulns>\n";
    for (const auto& v : verdict.vulns)
        out += "        <vuln>\n            <type>" + v.type + "</type>\n            <desc>" + v.description +
               "</desc>\n        </vuln>\n";
    return out + "    </vulns>\n</bug_eval>";
}

std::string to_xml(const std::vector<SinkPrecondition>& preconditions) {
    std::string out = "<sink_precondi>\n";
    for (const auto& p : preconditions) {
        const bool dom = p.kind == PreconditionKind::DominateCondition;
        const std::string ctx_tag = dom ? "dominated_sink" : "guard_bypass";
        out += " <precondi>\n  <type> " + std::string(to_string(p.kind)) + " </type>\n  <condition> " + p.condition +
               " </condition>\n  <" + ctx_tag + "> " + p.context + " </" + ctx_tag + ">\n </precondi>\n";
    }
    return out + "</sink_precondi>";
}

std::string to_xml(const std::vector<RangeConstraint>& constraints) {
    std::string out = "<range_constraints>\n";
    for (const auto& c : constraints)
        out += "  <constraint>\n    <type>" + std::string(to_string(c.kind)) + "</type>\n    <handler_func>" +
               c.handler_func + "</handler_func>\n    <context>" + c.context + "</context>\n  </constraint>\n";
    return out + "</range_constraints>";
}

std::string to_xml(const std::string& handler_func, ConstraintKind kind, const std::vector<ConditionPair>& pairs) {
    std::string out = " <range_constraint>\n   <type>" + std::string(to_string(kind)) + "</type>\n   <handler_func>" +
                      handler_func + "</handler_func>\n   <condition_pairs>\n";
    for (const auto& p : pairs)
        out += "   <pair>\n     <precondi>" + p.precondition + "</precondi>\n     <postcondi>" + p.postcondition +
               "</postcondi>\n     <context>" + p.context + "</context>\n   </pair>\n";
    return out + "   </condition_pairs>\n </range_constraint>";
}

std::string to_xml(FinalVerdict verdict) { return "<final_res>" + std::string(to_string(verdict)) + "</final_res>"; }

std::string to_xml(const std::vector<SourceVar>& vars) {
    std::string out = "<tainted_vars>\n";
    for (const auto& v : vars)
        out += "  <var>\n    <name>" + v.name + "</name>\n    <field>" + v.field + "</field>\n    <line>" +
               std::to_string(v.line) + "</line>\n  </var>\n";
    return out + "</tainted_vars>";
}

std::string_view schema_root(Stage stage) {
    switch (stage) {
        case Stage::VarInferSummarize: return "tainted_vars";
        case Stage::SecIASummarize: return "bug_eval";
        case Stage::ConA1: return "sink_precondi";
        case Stage::ConA2: return "range_constraints";
        case Stage::ConA3: return "range_constraint";
        case Stage::ConASummarize: return "final_res";
        default: return "";
    }
}

std::string schema_excerpt(std::string_view rendered_prompt, std::string_view root) {
    const std::string open = "<" + std::string(root);
    const std::string close = "</" + std::string(root) + ">";
    size_t b = rendered_prompt.find(open);
    while (b != std::string_view::npos) {
        const size_t after = b + open.size();
        if (after < rendered_prompt.size() &&
            (rendered_prompt[after] == '>' || std::isspace(static_cast<unsigned char>(rendered_prompt[after]))))
            break;
        b = rendered_prompt.find(open, b + 1);
    }
    const size_t e = rendered_prompt.rfind(close);
    if (b == std::string_view::npos || e == std::string_view::npos || e < b) return "<" + std::string(root) + ">...</" + std::string(root) + ">";
    return std::string(rendered_prompt.substr(b, e + close.size() - b));
}

}  // namespace triage
