#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "triage/pipeline.hpp"

namespace triage {

enum class TruthLabel { Bug, NotBug };

using GroundTruth = std::map<std::string, TruthLabel>;

/// JSON object {case_id: "bug" | "not_bug"}.
GroundTruth parse_ground_truth(std::string_view json_text);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Exact fraction; undefined when the denominator is zero.
struct Ratio {
    long num = 0;
    long den = 0;

    bool defined() const noexcept { return den > 0; }
    double value() const noexcept { return den > 0 ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
    bool operator==(const Ratio&) const = default;
};

/// Two decimals rounded half-up, or "-" when undefined.
std::string format_ratio(const Ratio& r);

struct MetricsSummary {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    Ratio precision, recall, f1;
    /// Ground-truth case ids with no result.
    std::vector<std::string> unscored;

    long total() const noexcept { return tp + tn + fp + fn; }
};

MetricsSummary metrics_from_counts(long tp, long tn, long fp, long fn);

/// Positive predictions are positive and uncertain_positive. Throws Error
/// listing every result case id missing from `truth`.
MetricsSummary compute_metrics(const std::vector<std::pair<std::string, FinalLabel>>& predictions,
                               const GroundTruth& truth);

nlohmann::json to_json(const MetricsSummary& m);

/// Markdown table with one FN / FP / F1 column group per configuration.
std::string compare_configs(const std::vector<std::pair<std::string, MetricsSummary>>& configs,
                            const std::string& row_label);

/// Markdown table with one row per configuration: TP TN FP FN Prec Rec F1.
std::string metrics_table(const std::vector<std::pair<std::string, MetricsSummary>>& rows);

}  // namespace triage
