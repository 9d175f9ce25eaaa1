#include "t2s/executor.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>
#include <cmath>
#include <set>
#include <thread>

#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

using nlohmann::json;

Cell Cell::null() { return Cell{}; }
Cell Cell::integer(std::int64_t v) { return Cell{Kind::Integer, v, 0.0, {}}; }
Cell Cell::real(double v) { return Cell{Kind::Real, 0, v, {}}; }
Cell Cell::text(std::string v) { return Cell{Kind::Text, 0, 0.0, std::move(v)}; }
Cell Cell::blob(std::string bytes) { return Cell{Kind::Blob, 0, 0.0, std::move(bytes)}; }

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Correct: return "correct";
        case Outcome::Incorrect: return "incorrect";
        case Outcome::GoldError: return "gold_error";
        case Outcome::PredError: return "pred_error";
        case Outcome::PredTimeout: return "pred_timeout";
    }
    return "incorrect";
}

std::optional<Outcome> outcome_from_name(const std::string& s) {
    if (s == "correct") return Outcome::Correct;
    if (s == "incorrect") return Outcome::Incorrect;
    if (s == "gold_error") return Outcome::GoldError;
    if (s == "pred_error") return Outcome::PredError;
    if (s == "pred_timeout") return Outcome::PredTimeout;
    return std::nullopt;
}

namespace {

// First keyword of the statement, skipping whitespace and SQL comments.
std::string leading_keyword(const std::string& sql) {
    size_t i = 0;
    const size_t n = sql.size();
    while (i < n) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = std::min(n, i + 2);
        } else {
            break;
        }
    }
    size_t b = i;
    while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '_')) ++i;
    return util::lower_ascii(sql.substr(b, i - b));
}

struct Deadline {
    std::chrono::steady_clock::time_point at;
    bool expired = false;
};

extern "C" int progress_callback(void* ctx) {
    auto* deadline = static_cast<Deadline*>(ctx);
    if (std::chrono::steady_clock::now() >= deadline->at) {
        deadline->expired = true;
        return 1; // abort the statement
    }
    return 0;
}

ExecError classify_error(const std::string& message, bool timed_out) {
    if (timed_out) return {ExecError::Kind::Timeout, "query exceeded time limit"};
    std::string low = util::lower_ascii(message);
    if (low.find("syntax error") != std::string::npos ||
        low.find("incomplete input") != std::string::npos) {
        return {ExecError::Kind::Syntax, message};
    }
    if (low.find("no such table") != std::string::npos ||
        low.find("no such column") != std::string::npos ||
        low.find("no such function") != std::string::npos ||
        low.find("ambiguous column") != std::string::npos) {
        return {ExecError::Kind::Schema, message};
    }
    return {ExecError::Kind::Other, message};
}

Cell read_cell(sqlite3_stmt* stmt, int col) {
    switch (sqlite3_column_type(stmt, col)) {
        case SQLITE_NULL:
            return Cell::null();
        case SQLITE_INTEGER:
            return Cell::integer(sqlite3_column_int64(stmt, col));
        case SQLITE_FLOAT:
            return Cell::real(sqlite3_column_double(stmt, col));
        case SQLITE_TEXT: {
            const unsigned char* p = sqlite3_column_text(stmt, col);
            int len = sqlite3_column_bytes(stmt, col);
            return Cell::text(std::string(reinterpret_cast<const char*>(p),
                                          static_cast<size_t>(len)));
        }
        case SQLITE_BLOB: {
            const void* p = sqlite3_column_blob(stmt, col);
            int len = sqlite3_column_bytes(stmt, col);
            return Cell::blob(std::string(static_cast<const char*>(p ? p : ""),
                                          static_cast<size_t>(p ? len : 0)));
        }
    }
    return Cell::null();
}

} // namespace

namespace {

// Statements rejected before they ever reach the engine. The read-only
// connection is the backstop for anything not on this list.
bool is_mutating_keyword(const std::string& keyword) {
    static const std::set<std::string> kBlocked = {
        "insert", "update", "delete", "drop",      "attach",    "pragma", "create",
        "alter",  "replace", "vacuum", "reindex",  "detach",    "begin",  "commit",
        "rollback", "analyze", "savepoint", "release", "end",   "explain",
    };
    return kBlocked.count(keyword) > 0;
}

} // namespace

ExecResult execute_query(const DatabaseSchema& schema, const std::string& sql,
                         const ExecLimits& limits) {
    std::string keyword = leading_keyword(sql);
    if (keyword.empty()) {
        return ExecError{ExecError::Kind::Syntax, "empty statement"};
    }
    if (is_mutating_keyword(keyword)) {
        return ExecError{ExecError::Kind::Refused, "refused statement: " + keyword};
    }

    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(schema.db_file.string().c_str(), &db, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "cannot open database";
        sqlite3_close(db);
        return ExecError{ExecError::Kind::Other, msg};
    }

    Deadline deadline{std::chrono::steady_clock::now() +
                      std::chrono::microseconds(static_cast<int64_t>(limits.timeout_s * 1e6))};
    sqlite3_progress_handler(db, 500, progress_callback, &deadline);

    sqlite3_stmt* stmt = nullptr;
    const char* tail = nullptr;
    rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, &tail);
    if (rc != SQLITE_OK) {
        ExecError err = classify_error(sqlite3_errmsg(db), deadline.expired);
        sqlite3_finalize(stmt);
        sqlite3_close(db);
        return err;
    }
    if (!stmt) {
        sqlite3_close(db);
        return ExecError{ExecError::Kind::Syntax, "empty statement"};
    }
    if (tail && !util::trim(tail).empty()) {
        sqlite3_finalize(stmt);
        sqlite3_close(db);
        return ExecError{ExecError::Kind::Refused, "multiple statements are not allowed"};
    }

    Denotation result;
    result.columns = sqlite3_column_count(stmt);
    for (;;) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            if (result.rows.size() >= limits.row_cap) {
                result.truncated = true;
                break;
            }
            std::vector<Cell> row;
            row.reserve(static_cast<size_t>(result.columns));
            for (int c = 0; c < result.columns; ++c) row.push_back(read_cell(stmt, c));
            result.rows.push_back(std::move(row));
        } else if (rc == SQLITE_DONE) {
            break;
        } else {
            ExecError err = classify_error(sqlite3_errmsg(db), deadline.expired);
            sqlite3_finalize(stmt);
            sqlite3_close(db);
            return err;
        }
    }
    sqlite3_finalize(stmt);
    sqlite3_close(db);
    return result;
}

bool requires_order(const std::string& gold_sql) {
    const std::string& s = gold_sql;
    size_t i = 0;
    int depth = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '\'' || c == '"') {
            char q = c;
            ++i;
            while (i < s.size()) {
                if (s[i] == q) {
                    if (i + 1 < s.size() && s[i + 1] == q) {
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                ++i;
            }
        } else if (c == '(') {
            ++depth;
            ++i;
        } else if (c == ')') {
            depth = std::max(0, depth - 1);
            ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t b = i;
            while (i < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) {
                ++i;
            }
            if (depth == 0 && util::lower_ascii(s.substr(b, i - b)) == "order") {
                size_t j = i;
                while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
                if (util::starts_with_word_ci(std::string_view(s).substr(j), "by")) return true;
            }
        } else {
            ++i;
        }
    }
    return false;
}

namespace {

constexpr double kRelTol = 1e-6;

bool numeric_kind(Cell::Kind k) {
    return k == Cell::Kind::Integer || k == Cell::Kind::Real;
}

double numeric_value(const Cell& c) {
    return c.kind == Cell::Kind::Integer ? static_cast<double>(c.i) : c.r;
}

bool cells_equal(const Cell& a, const Cell& b) {
    if (numeric_kind(a.kind) && numeric_kind(b.kind)) {
        if (a.kind == Cell::Kind::Integer && b.kind == Cell::Kind::Integer) return a.i == b.i;
        double x = numeric_value(a), y = numeric_value(b);
        return std::fabs(x - y) <= kRelTol * std::max({1.0, std::fabs(x), std::fabs(y)});
    }
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Cell::Kind::Null: return true;
        case Cell::Kind::Text:
        case Cell::Kind::Blob: return a.s == b.s;
        default: return false; // unreachable
    }
}

// Total order for canonical multiset form: Null < numeric < Text < Blob.
int cell_class(const Cell& c) {
    switch (c.kind) {
        case Cell::Kind::Null: return 0;
        case Cell::Kind::Integer:
        case Cell::Kind::Real: return 1;
        case Cell::Kind::Text: return 2;
        case Cell::Kind::Blob: return 3;
    }
    return 3;
}

bool cell_less(const Cell& a, const Cell& b) {
    int ca = cell_class(a), cb = cell_class(b);
    if (ca != cb) return ca < cb;
    switch (ca) {
        case 0: return false;
        case 1: {
            double x = numeric_value(a), y = numeric_value(b);
            if (x != y) return x < y;
            return a.kind < b.kind; // ints before reals of equal value, keeps sorting stable
        }
        default: return a.s < b.s;
    }
}

bool row_less(const std::vector<Cell>& a, const std::vector<Cell>& b) {
    for (size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (cell_less(a[i], b[i])) return true;
        if (cell_less(b[i], a[i])) return false;
    }
    return a.size() < b.size();
}

bool rows_equal(const std::vector<Cell>& a, const std::vector<Cell>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (!cells_equal(a[i], b[i])) return false;
    }
    return true;
}

} // namespace

bool denotations_match(const Denotation& gold, const Denotation& pred, bool order_sensitive) {
    if (gold.columns != pred.columns) return false;
    if (gold.rows.size() != pred.rows.size()) return false;
    if (order_sensitive) {
        for (size_t i = 0; i < gold.rows.size(); ++i) {
            if (!rows_equal(gold.rows[i], pred.rows[i])) return false;
        }
        return true;
    }
    auto g = gold.rows;
    auto p = pred.rows;
    std::sort(g.begin(), g.end(), row_less);
    std::sort(p.begin(), p.end(), row_less);
    for (size_t i = 0; i < g.size(); ++i) {
        if (!rows_equal(g[i], p[i])) return false;
    }
    return true;
}

Verdict judge(const DatabaseSchema& schema, const std::string& gold_sql,
              const std::string& pred_sql, const ExecLimits& limits) {
    Verdict verdict;
    ExecResult gold = execute_query(schema, gold_sql, limits);
    if (const auto* err = std::get_if<ExecError>(&gold)) {
        verdict.outcome = Outcome::GoldError;
        verdict.message = "gold failed: " + err->message;
        return verdict;
    }
    const Denotation& gd = std::get<Denotation>(gold);
    verdict.gold_rows = gd.rows.size();

    ExecResult pred = execute_query(schema, pred_sql, limits);
    if (const auto* err = std::get_if<ExecError>(&pred)) {
        verdict.outcome = err->kind == ExecError::Kind::Timeout ? Outcome::PredTimeout
                                                                : Outcome::PredError;
        verdict.message = "prediction failed: " + err->message;
        return verdict;
    }
    const Denotation& pd = std::get<Denotation>(pred);
    verdict.pred_rows = pd.rows.size();

    bool ok = denotations_match(gd, pd, requires_order(gold_sql));
    verdict.outcome = ok ? Outcome::Correct : Outcome::Incorrect;
    if (!ok) {
        verdict.message = "denotation mismatch (gold " + std::to_string(gd.rows.size()) +
                          " rows, pred " + std::to_string(pd.rows.size()) + " rows)";
    }
    return verdict;
}

EvalReport evaluate_set(const ExampleSet& examples, const std::vector<std::string>& predictions,
                        const DatabaseCatalog& catalog, const ExecLimits& limits, int jobs) {
    if (predictions.size() != examples.size()) {
        fail(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                       std::to_string(examples.size()) + " examples");
    }
    EvalReport report;
    report.total = examples.size();
    report.ids.reserve(examples.size());
    for (const auto& ex : examples.items()) report.ids.push_back(ex.id);
    report.verdicts.assign(examples.size(), Verdict{});

    auto judge_one = [&](size_t i) {
        const Example& ex = examples.at(i);
        const DatabaseSchema& schema = catalog.at(ex.db_id);
        std::string pred = util::trim(predictions[i]);
        if (pred.empty()) {
            Verdict v;
            v.outcome = Outcome::PredError;
            v.message = "empty prediction";
            report.verdicts[i] = v;
            return;
        }
        report.verdicts[i] = judge(schema, ex.gold_sql, pred, limits);
    };

    int workers = std::max(1, jobs);
    if (workers == 1 || examples.size() < 2) {
        for (size_t i = 0; i < examples.size(); ++i) judge_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        size_t nthreads = std::min<size_t>(static_cast<size_t>(workers), examples.size());
        for (size_t w = 0; w < nthreads; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    size_t i = next.fetch_add(1);
                    if (i >= examples.size()) return;
                    judge_one(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    for (const auto& v : report.verdicts) {
        if (v.outcome == Outcome::Correct) ++report.correct;
        if (v.outcome == Outcome::GoldError) ++report.gold_errors;
    }
    size_t denom = report.total - report.gold_errors;
    report.accuracy =
        denom == 0 ? 0.0 : 100.0 * static_cast<double>(report.correct) / static_cast<double>(denom);
    return report;
}

std::vector<std::string> load_predictions(const std::filesystem::path& path) {
    std::string content = util::read_file(path);
    std::vector<std::string> preds;
    std::string cur;
    for (char c : content) {
        if (c == '\n') {
            preds.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) preds.push_back(cur);
    return preds;
}

json report_to_json(const EvalReport& report, const json& meta) {
    json examples = json::array();
    for (size_t i = 0; i < report.ids.size(); ++i) {
        const Verdict& v = report.verdicts[i];
        json e{{"id", report.ids[i]},
               {"outcome", outcome_name(v.outcome)},
               {"message", v.message}};
        if (v.gold_rows) e["gold_rows"] = *v.gold_rows;
        if (v.pred_rows) e["pred_rows"] = *v.pred_rows;
        examples.push_back(std::move(e));
    }
    return json{{"meta", meta},
                {"summary",
                 {{"total", report.total},
                  {"correct", report.correct},
                  {"gold_errors", report.gold_errors},
                  {"accuracy", report.accuracy},
                  {"accuracy_display", util::format_pct1(report.accuracy)}}},
                {"examples", std::move(examples)}};
}

EvalReport report_from_json(const json& j) {
    EvalReport report;
    const json& summary = j.at("summary");
    report.total = summary.at("total").get<size_t>();
    report.correct = summary.at("correct").get<size_t>();
    report.gold_errors = summary.at("gold_errors").get<size_t>();
    report.accuracy = summary.at("accuracy").get<double>();
    for (const auto& e : j.value("examples", json::array())) {
        report.ids.push_back(e.at("id").get<std::string>());
        Verdict v;
        auto outcome = outcome_from_name(e.at("outcome").get<std::string>());
        if (!outcome) fail(Errc::MalformedExample, "unknown outcome: " + e.at("outcome").dump());
        v.outcome = *outcome;
        v.message = e.value("message", std::string());
        if (e.contains("gold_rows")) v.gold_rows = e["gold_rows"].get<size_t>();
        if (e.contains("pred_rows")) v.pred_rows = e["pred_rows"].get<size_t>();
        report.verdicts.push_back(std::move(v));
    }
    return report;
}

} // namespace t2s
