#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "t2s/corpus.hpp"
#include "t2s/executor.hpp"

namespace t2s {

struct PairedSet {
    std::string category;
    ExampleSet pre;
    ExampleSet post;
};

struct RobustnessRow {
    std::string category;
    double pre_acc = 0.0;  // percent
    double post_acc = 0.0; // percent, absolute robustness
    double diff = 0.0;     // pre - post, relative robustness
};

struct RobustnessReport {
    std::vector<RobustnessRow> rows;
    RobustnessRow average; // unweighted mean over categories
};

enum class ReportFormat { Text, Markdown, Json };

// Positional alignment; every index must agree on db_id.
PairedSet pair_sets(const ExampleSet& pre, const ExampleSet& post,
                    const std::string& category = "");

RobustnessRow compute_metrics(const EvalReport& pre_report, const EvalReport& post_report,
                              const std::string& category = "");

// Macro average over category rows; rounding happens only at render time.
RobustnessReport aggregate_categories(const std::vector<RobustnessRow>& rows);

std::string render_report(const RobustnessReport& report, ReportFormat format,
                          bool include_diff = true);

RobustnessReport report_from_render_json(const nlohmann::json& j);

} // namespace t2s
