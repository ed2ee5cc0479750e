#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace triage {

class SymbolIndex;

enum class DetectorKind {
    TaintedArith,
    TaintedLoopBound,
    TaintedPtrDeref,
    BufferOverflow,
    TaintedCopyLen,
};

/// Canonical spelling used in report files ("TaintedArith", ...).
std::string_view to_string(DetectorKind kind);

/// Throws ParseError for anything that is not an exact canonical spelling.
DetectorKind detector_from_string(std::string_view text);

/// Wording shown to the model, matching the detector list in the SecIA prompt.
std::string_view detector_description(DetectorKind kind);

struct DataflowStep {
    int line = 0;
    std::string note;

    bool operator==(const DataflowStep&) const = default;
};

/// One static-analyzer finding in canonical form.
struct TaintReport {
    std::string case_id;
    DetectorKind detector = DetectorKind::TaintedArith;
    std::string sink_file;
    int sink_line = 0;
    std::string tainted_value;
    std::vector<std::string> call_chain;  // entry first, sink function last
    std::vector<DataflowStep> ir_dataflow;
    std::set<int> source_line_set;

    const std::string& sink_function() const { return call_chain.back(); }

    bool operator==(const TaintReport&) const = default;
};

/// Parses JSON-lines text; blank lines are ignored, every other line is one case.
std::vector<TaintReport> parse_reports(std::string_view jsonl);
std::vector<TaintReport> parse_report_file(const std::filesystem::path& path);

std::string serialize_reports(const std::vector<TaintReport>& reports);

using DetectorMapping = std::map<std::string, DetectorKind>;

DetectorMapping load_detector_mapping(const std::filesystem::path& path);
DetectorMapping parse_detector_mapping(std::string_view json_text);

struct SarifImport {
    std::vector<TaintReport> reports;
    std::vector<std::string> warnings;
};

/// Reads the runs[].results[].codeFlows subset of SARIF 2.1.0.
///
/// Function names come from logicalLocations when the producer emitted them;
/// otherwise, when `index` is given, from the indexed function enclosing the
/// location. Results without a code flow are skipped with a warning.
SarifImport adapt_sarif(const std::filesystem::path& path, const DetectorMapping& mapping,
                        const SymbolIndex* index = nullptr);
SarifImport adapt_sarif_text(std::string_view sarif_json, const DetectorMapping& mapping,
                             const SymbolIndex* index = nullptr);

/// Advisory check of a report against the corpus; empty means fully resolvable.
std::vector<std::string> validate_report(const TaintReport& report, const SymbolIndex& index);

}  // namespace triage
