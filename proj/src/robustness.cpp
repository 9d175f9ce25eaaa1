#include "t2s/robustness.hpp"

#include <sstream>

#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

using nlohmann::json;

PairedSet pair_sets(const ExampleSet& pre, const ExampleSet& post, const std::string& category) {
    if (pre.size() != post.size()) {
        fail(Errc::SizeMismatch, "pre has " + std::to_string(pre.size()) + " examples, post has " +
                                     std::to_string(post.size()));
    }
    for (size_t i = 0; i < pre.size(); ++i) {
        if (pre.at(i).db_id != post.at(i).db_id) {
            fail(Errc::DbIdMismatch, "index " + std::to_string(i) + ": " + pre.at(i).db_id +
                                         " vs " + post.at(i).db_id);
        }
    }
    PairedSet paired;
    paired.category = category;
    paired.pre = pre;
    paired.post = post;
    return paired;
}

RobustnessRow compute_metrics(const EvalReport& pre_report, const EvalReport& post_report,
                              const std::string& category) {
    RobustnessRow row;
    row.category = category;
    row.pre_acc = pre_report.accuracy;
    row.post_acc = post_report.accuracy;
    row.diff = row.pre_acc - row.post_acc;
    return row;
}

RobustnessReport aggregate_categories(const std::vector<RobustnessRow>& rows) {
    if (rows.empty()) fail(Errc::EmptyInput, "no category rows to aggregate");
    RobustnessReport report;
    report.rows = rows;
    double pre = 0.0, post = 0.0;
    for (const auto& row : rows) {
        pre += row.pre_acc;
        post += row.post_acc;
    }
    report.average.category = "Average";
    report.average.pre_acc = pre / static_cast<double>(rows.size());
    report.average.post_acc = post / static_cast<double>(rows.size());
    report.average.diff = report.average.pre_acc - report.average.post_acc;
    return report;
}

namespace {

json row_to_json(const RobustnessRow& row) {
    return json{{"category", row.category},
                {"pre_acc", row.pre_acc},
                {"post_acc", row.post_acc},
                {"diff", row.diff},
                {"display",
                 {{"pre", util::format_pct1(row.pre_acc)},
                  {"post", util::format_pct1(row.post_acc)},
                  {"diff", util::format_pct1(row.diff)}}}};
}

RobustnessRow row_from_json(const json& j) {
    RobustnessRow row;
    row.category = j.at("category").get<std::string>();
    row.pre_acc = j.at("pre_acc").get<double>();
    row.post_acc = j.at("post_acc").get<double>();
    row.diff = j.at("diff").get<double>();
    return row;
}

} // namespace

std::string render_report(const RobustnessReport& report, ReportFormat format,
                          bool include_diff) {
    if (format == ReportFormat::Json) {
        json rows = json::array();
        for (const auto& row : report.rows) rows.push_back(row_to_json(row));
        return json{{"rows", std::move(rows)}, {"average", row_to_json(report.average)}}.dump(2) +
               "\n";
    }

    std::vector<const RobustnessRow*> all;
    for (const auto& row : report.rows) all.push_back(&row);
    all.push_back(&report.average);

    if (format == ReportFormat::Markdown) {
        std::ostringstream out;
        out << "| Category | Pre | Post |";
        if (include_diff) out << " Diff |";
        out << "\n|---|---:|---:|";
        if (include_diff) out << "---:|";
        out << "\n";
        for (const auto* row : all) {
            out << "| " << row->category << " | " << util::format_pct1(row->pre_acc) << " | "
                << util::format_pct1(row->post_acc) << " |";
            if (include_diff) out << " " << util::format_pct1(row->diff) << " |";
            out << "\n";
        }
        return out.str();
    }

    size_t width = std::string("Category").size();
    for (const auto* row : all) width = std::max(width, row->category.size());
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-*s %8s %8s", static_cast<int>(width), "Category", "Pre",
                  "Post");
    out << buf;
    if (include_diff) out << "     Diff";
    out << "\n";
    for (const auto* row : all) {
        std::snprintf(buf, sizeof(buf), "%-*s %8s %8s", static_cast<int>(width),
                      row->category.c_str(), util::format_pct1(row->pre_acc).c_str(),
                      util::format_pct1(row->post_acc).c_str());
        out << buf;
        if (include_diff) {
            std::snprintf(buf, sizeof(buf), " %8s", util::format_pct1(row->diff).c_str());
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

RobustnessReport report_from_render_json(const json& j) {
    RobustnessReport report;
    for (const auto& row : j.at("rows")) report.rows.push_back(row_from_json(row));
    report.average = row_from_json(j.at("average"));
    return report;
}

} // namespace t2s
