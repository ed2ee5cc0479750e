#include "triage/eval.hpp"

#include <fstream>
#include <sstream>

#include "triage/error.hpp"

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

GroundTruth parse_ground_truth(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("ground truth: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("ground truth must be a JSON object");
    GroundTruth truth;
    for (const auto& [id, label] : j.items()) {
        const std::string s = label.is_string() ? label.get<std::string>() : "";
        if (s == "bug") truth[id] = TruthLabel::Bug;
        else if (s == "not_bug") truth[id] = TruthLabel::NotBug;
        else throw ParseError("ground truth: case " + id + " has label '" + label.dump() + "'");
    }
    return truth;
}

GroundTruth load_ground_truth(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ground_truth(ss.str());
}

std::string format_ratio(const Ratio& r) {
    if (!r.defined()) return "-";
    // round(100 * num / den) half-up, in integers
    const long hundredths = (200 * r.num + r.den) / (2 * r.den);
    const long whole = hundredths / 100, frac = hundredths % 100;
    return std::to_string(whole) + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

MetricsSummary metrics_from_counts(long tp, long tn, long fp, long fn) {
    if (tp < 0 || tn < 0 || fp < 0 || fn < 0) throw Error("confusion counts must not be negative");
    MetricsSummary m;
    m.tp = tp;
    m.tn = tn;
    m.fp = fp;
    m.fn = fn;
    m.precision = {tp, tp + fp};
    m.recall = {tp, tp + fn};
    // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); undefined unless both P and R are.
    if (m.precision.defined() && m.recall.defined()) m.f1 = {2 * tp, 2 * tp + fp + fn};
    if (m.f1.defined() && tp == 0) m.f1 = {0, 1};
    return m;
}

MetricsSummary compute_metrics(const std::vector<std::pair<std::string, FinalLabel>>& predictions,
                               const GroundTruth& truth) {
    std::vector<std::string> missing;
    long tp = 0, tn = 0, fp = 0, fn = 0;
    std::map<std::string, bool> scored;
    for (const auto& [id, label] : predictions) {
        auto it = truth.find(id);
        if (it == truth.end()) {
            missing.push_back(id);
            continue;
        }
        if (scored.count(id)) throw Error("duplicate result for case " + id);
        scored[id] = true;
        const bool predicted = label != FinalLabel::Negative;
        const bool actual = it->second == TruthLabel::Bug;
        if (predicted && actual) ++tp;
        else if (predicted) ++fp;
        else if (actual) ++fn;
        else ++tn;
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw Error("no ground-truth label for case(s): " + list);
    }
    MetricsSummary m = metrics_from_counts(tp, tn, fp, fn);
    for (const auto& [id, _] : truth)
        if (!scored.count(id)) m.unscored.push_back(id);
    return m;
}

namespace {

json ratio_json(const Ratio& r) { return r.defined() ? json(r.value()) : json(nullptr); }

}  // namespace

json to_json(const MetricsSummary& m) {
    return {{"tp", m.tp},
            {"tn", m.tn},
            {"fp", m.fp},
            {"fn", m.fn},
            {"precision", ratio_json(m.precision)},
            {"recall", ratio_json(m.recall)},
            {"f1", ratio_json(m.f1)},
            {"precision_display", format_ratio(m.precision)},
            {"recall_display", format_ratio(m.recall)},
            {"f1_display", format_ratio(m.f1)},
            {"unscored", m.unscored}};
}

std::string compare_configs(const std::vector<std::pair<std::string, MetricsSummary>>& configs,
                            const std::string& row_label) {
    std::ostringstream out;
    out << "| Model |";
    for (const auto& [name, _] : configs) out << " " << name << " | | |";
    out << "\n|---|";
    for (size_t i = 0; i < configs.size(); ++i) out << "---:|---:|---:|";
    out << "\n| |";
    for (size_t i = 0; i < configs.size(); ++i) out << " FN | FP | F1 |";
    out << "\n| " << row_label << " |";
    for (const auto& [_, m] : configs) out << " " << m.fn << " | " << m.fp << " | " << format_ratio(m.f1) << " |";
    out << "\n";
    return out.str();
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsSummary>>& rows) {
    std::ostringstream out;
    out << "| Method | TP | TN | FP | FN | Prec | Rec | F1 |\n|---|---:|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& [name, m] : rows)
        out << "| " << name << " | " << m.tp << " | " << m.tn << " | " << m.fp << " | " << m.fn << " | "
            << format_ratio(m.precision) << " | " << format_ratio(m.recall) << " | " << format_ratio(m.f1) << " |\n";
    return out.str();
}

}  // namespace triage
