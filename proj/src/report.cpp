#include "triage/report.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "triage/code_index.hpp"
#include "triage/error.hpp"

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DetectorInfo {
    DetectorKind kind;
    std::string_view name;
    std::string_view description;
};

constexpr std::array<DetectorInfo, 5> kDetectors{{
    {DetectorKind::TaintedArith, "TaintedArith", "Tainted Arithmetic Operations (integer overflows)"},
    {DetectorKind::TaintedLoopBound, "TaintedLoopBound", "Tainted Loop Bound Conditions (infinite loops, unexpected iterations)"},
    {DetectorKind::TaintedPtrDeref, "TaintedPtrDeref", "Tainted Pointer Dereferences (arbitrary memory access)"},
    {DetectorKind::BufferOverflow, "BufferOverflow", "Buffer Overflow (out-of-bounds access)"},
    {DetectorKind::TaintedCopyLen, "TaintedCopyLen", "Tainted length in copy_from_user (especially stack overflow)"},
}};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string case_prefix(size_t index) { return "case " + std::to_string(index) + ": "; }

template <class T>
T required(const json& obj, const char* key, size_t index) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) throw ParseError(case_prefix(index) + "missing " + key);
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ParseError(case_prefix(index) + "field " + key + " has the wrong type");
    }
}

TaintReport report_from_json(const json& obj, size_t index) {
    if (!obj.is_object()) throw ParseError(case_prefix(index) + "entry is not a JSON object");
    TaintReport r;
    r.case_id = required<std::string>(obj, "case_id", index);
    const auto detector = required<std::string>(obj, "detector", index);
    try {
        r.detector = detector_from_string(detector);
    } catch (const ParseError& e) {
        throw ParseError(case_prefix(index) + e.what());
    }
    r.sink_file = required<std::string>(obj, "sink_file", index);
    r.sink_line = required<int>(obj, "sink_line", index);
    r.tainted_value = required<std::string>(obj, "tainted_value", index);
    r.call_chain = required<std::vector<std::string>>(obj, "call_chain", index);
    const json flow = required<json>(obj, "ir_dataflow", index);
    if (!flow.is_array()) throw ParseError(case_prefix(index) + "field ir_dataflow has the wrong type");
    for (const auto& step : flow) {
        if (!step.is_object() || !step.contains("line") || !step.contains("note"))
            throw ParseError(case_prefix(index) + "ir_dataflow entries need line and note");
        r.ir_dataflow.push_back({step.at("line").get<int>(), step.at("note").get<std::string>()});
    }
    const auto lines = required<std::vector<int>>(obj, "source_line_set", index);
    r.source_line_set = {lines.begin(), lines.end()};

    if (r.case_id.empty()) throw ParseError(case_prefix(index) + "empty case_id");
    if (r.sink_line <= 0) throw ParseError(case_prefix(index) + "sink_line must be positive");
    if (r.call_chain.empty()) throw ParseError(case_prefix(index) + "call_chain is empty");
    for (int line : r.source_line_set)
        if (line <= 0) throw ParseError(case_prefix(index) + "source_line_set holds a non-positive line");
    if (!r.source_line_set.count(r.sink_line))
        throw ParseError(case_prefix(index) + "sink_line not in source_line_set");
    return r;
}

json report_to_json(const TaintReport& r) {
    json flow = json::array();
    for (const auto& step : r.ir_dataflow) flow.push_back({{"line", step.line}, {"note", step.note}});
    return {
        {"case_id", r.case_id},
        {"detector", to_string(r.detector)},
        {"sink_file", r.sink_file},
        {"sink_line", r.sink_line},
        {"tainted_value", r.tainted_value},
        {"call_chain", r.call_chain},
        {"ir_dataflow", flow},
        {"source_line_set", std::vector<int>(r.source_line_set.begin(), r.source_line_set.end())},
    };
}

}  // namespace

std::string_view to_string(DetectorKind kind) {
    for (const auto& d : kDetectors)
        if (d.kind == kind) return d.name;
    return "unknown";
}

DetectorKind detector_from_string(std::string_view text) {
    for (const auto& d : kDetectors)
        if (d.name == text) return d.kind;
    throw ParseError("unknown detector kind '" + std::string(text) + "'");
}

std::string_view detector_description(DetectorKind kind) {
    for (const auto& d : kDetectors)
        if (d.kind == kind) return d.description;
    return "unknown";
}

std::vector<TaintReport> parse_reports(std::string_view jsonl) {
    std::vector<TaintReport> out;
    std::set<std::string> seen;
    size_t index = 0;
    size_t pos = 0;
    while (pos <= jsonl.size()) {
        size_t eol = jsonl.find('\n', pos);
        if (eol == std::string_view::npos) eol = jsonl.size();
        std::string_view line = jsonl.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(case_prefix(index) + "invalid JSON: " + e.what());
        }
        TaintReport r = report_from_json(obj, index);
        if (!seen.insert(r.case_id).second)
            throw ParseError(case_prefix(index) + "duplicate case_id '" + r.case_id + "'");
        out.push_back(std::move(r));
        ++index;
    }
    return out;
}

std::vector<TaintReport> parse_report_file(const fs::path& path) { return parse_reports(read_text(path)); }

std::string serialize_reports(const std::vector<TaintReport>& reports) {
    std::string out;
    for (const auto& r : reports) {
        out += report_to_json(r).dump();
        out += '\n';
    }
    return out;
}

DetectorMapping parse_detector_mapping(std::string_view json_text) {
    json obj;
    try {
        obj = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("detector mapping: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError("detector mapping must be a JSON object");
    DetectorMapping mapping;
    for (const auto& [rule, kind] : obj.items()) {
        if (!kind.is_string()) throw ParseError("detector mapping: value for " + rule + " is not a string");
        mapping[rule] = detector_from_string(kind.get<std::string>());
    }
    return mapping;
}

DetectorMapping load_detector_mapping(const fs::path& path) { return parse_detector_mapping(read_text(path)); }

namespace {

struct FlowLocation {
    std::string file;
    int line = 0;
    std::string function;
    std::string message;
};

FlowLocation flow_location(const json& loc) {
    FlowLocation out;
    const json& l = loc.contains("location") ? loc.at("location") : loc;
    if (auto phys = l.find("physicalLocation"); phys != l.end()) {
        if (auto art = phys->find("artifactLocation"); art != phys->end() && art->contains("uri"))
            out.file = art->at("uri").get<std::string>();
        if (auto region = phys->find("region"); region != phys->end() && region->contains("startLine"))
            out.line = region->at("startLine").get<int>();
    }
    if (auto logical = l.find("logicalLocations"); logical != l.end() && logical->is_array() && !logical->empty()) {
        const json& first = logical->front();
        if (first.contains("name")) out.function = first.at("name").get<std::string>();
        else if (first.contains("fullyQualifiedName")) out.function = first.at("fullyQualifiedName").get<std::string>();
    }
    if (auto msg = l.find("message"); msg != l.end() && msg->contains("text"))
        out.message = msg->at("text").get<std::string>();
    return out;
}

std::string strip_uri(std::string uri) {
    if (uri.rfind("file://", 0) == 0) uri = uri.substr(7);
    while (uri.rfind("./", 0) == 0) uri = uri.substr(2);
    return uri;
}

}  // namespace

SarifImport adapt_sarif_text(std::string_view sarif_json, const DetectorMapping& mapping, const SymbolIndex* index) {
    json doc;
    try {
        doc = json::parse(sarif_json);
    } catch (const json::exception& e) {
        throw ParseError(std::string("SARIF: ") + e.what());
    }
    SarifImport out;
    std::set<std::string> unmapped;
    size_t result_no = 0;
    const json runs = doc.value("runs", json::array());
    for (const auto& run : runs) {
        for (const auto& result : run.value("results", json::array())) {
            const size_t this_no = result_no++;
            const std::string rule = result.value("ruleId", std::string{});
            auto flows = result.find("codeFlows");
            if (flows == result.end() || !flows->is_array() || flows->empty()) {
                out.warnings.push_back("result " + std::to_string(this_no) + " (" + rule + "): no code flow, skipped");
                continue;
            }
            auto kind = mapping.find(rule);
            if (kind == mapping.end()) {
                unmapped.insert(rule);
                continue;
            }
            std::vector<FlowLocation> locs;
            for (const auto& tf : flows->front().value("threadFlows", json::array()))
                for (const auto& loc : tf.value("locations", json::array())) locs.push_back(flow_location(loc));
            if (locs.empty()) {
                out.warnings.push_back("result " + std::to_string(this_no) + " (" + rule + "): empty code flow, skipped");
                continue;
            }
            TaintReport r;
            r.case_id = "sarif-" + std::to_string(this_no);
            r.detector = kind->second;
            const FlowLocation& sink = locs.back();
            r.sink_file = strip_uri(sink.file);
            r.sink_line = sink.line;
            r.tainted_value = !sink.message.empty() ? sink.message : result.value("message", json::object()).value("text", std::string{});
            for (const auto& loc : locs) {
                std::string fn = loc.function;
                if (fn.empty() && index != nullptr) {
                    if (auto def = index->function_at(strip_uri(loc.file), loc.line)) fn = def->name;
                }
                if (fn.empty()) fn = strip_uri(loc.file) + ":" + std::to_string(loc.line);
                if (r.call_chain.empty() || r.call_chain.back() != fn) r.call_chain.push_back(fn);
                if (loc.line > 0) {
                    r.ir_dataflow.push_back({loc.line, loc.message});
                    if (strip_uri(loc.file) == r.sink_file) r.source_line_set.insert(loc.line);
                }
            }
            if (r.sink_line <= 0) {
                out.warnings.push_back("result " + std::to_string(this_no) + " (" + rule + "): sink has no line, skipped");
                continue;
            }
            r.source_line_set.insert(r.sink_line);
            out.reports.push_back(std::move(r));
        }
    }
    if (!unmapped.empty()) {
        std::string ids;
        for (const auto& id : unmapped) ids += (ids.empty() ? "" : ", ") + id;
        throw ParseError("SARIF: unmapped rule id(s): " + ids);
    }
    return out;
}

SarifImport adapt_sarif(const fs::path& path, const DetectorMapping& mapping, const SymbolIndex* index) {
    return adapt_sarif_text(read_text(path), mapping, index);
}

std::vector<std::string> validate_report(const TaintReport& report, const SymbolIndex& index) {
    std::vector<std::string> warnings;
    if (!index.has_file(report.sink_file)) warnings.push_back("sink file not in corpus: " + report.sink_file);
    std::set<std::string> reported;
    for (const auto& fn : report.call_chain) {
        if (index.get_func_def(fn).empty() && reported.insert(fn).second)
            warnings.push_back("no definition found for call-chain function: " + fn);
    }
    return warnings;
}

}  // namespace triage
