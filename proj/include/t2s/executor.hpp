#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "t2s/corpus.hpp"

namespace t2s {

struct Cell {
    enum class Kind { Null, Integer, Real, Text, Blob };
    Kind kind = Kind::Null;
    std::int64_t i = 0;
    double r = 0.0;
    std::string s; // text bytes or blob bytes

    static Cell null();
    static Cell integer(std::int64_t v);
    static Cell real(double v);
    static Cell text(std::string v);
    static Cell blob(std::string bytes);
};

struct Denotation {
    int columns = 0;
    std::vector<std::vector<Cell>> rows;
    bool truncated = false;
};

struct ExecError {
    enum class Kind { Syntax, Schema, Timeout, Refused, Other };
    Kind kind = Kind::Other;
    std::string message;
};

using ExecResult = std::variant<Denotation, ExecError>;

struct ExecLimits {
    double timeout_s = 30.0;
    std::size_t row_cap = 100000;
};

enum class Outcome { Correct, Incorrect, GoldError, PredError, PredTimeout };

const char* outcome_name(Outcome o);
std::optional<Outcome> outcome_from_name(const std::string& s);

struct Verdict {
    Outcome outcome = Outcome::Incorrect;
    std::optional<std::size_t> gold_rows;
    std::optional<std::size_t> pred_rows;
    std::string message;
};

struct EvalReport {
    std::vector<std::string> ids;
    std::vector<Verdict> verdicts;
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t gold_errors = 0;
    double accuracy = 0.0; // percent, full precision
};

// Runs one statement over a read-only connection. Statements that are not
// SELECT/WITH/VALUES are refused before touching the database.
ExecResult execute_query(const DatabaseSchema& schema, const std::string& sql,
                         const ExecLimits& limits);

// True iff the query has a top-level ORDER BY (outside string literals and
// parenthesized subqueries).
bool requires_order(const std::string& gold_sql);

// Column counts must match; rows compare as sequences when order_sensitive,
// multisets otherwise. Numeric cells compare with 1e-6 relative tolerance,
// text/blob byte-exact, Null only equals Null.
bool denotations_match(const Denotation& gold, const Denotation& pred, bool order_sensitive);

Verdict judge(const DatabaseSchema& schema, const std::string& gold_sql,
              const std::string& pred_sql, const ExecLimits& limits);

// Predictions aligned with examples by index. accuracy excludes GoldError
// examples from the denominator.
EvalReport evaluate_set(const ExampleSet& examples, const std::vector<std::string>& predictions,
                        const DatabaseCatalog& catalog, const ExecLimits& limits, int jobs = 1);

// Plain text, one SQL query per line; blank line = empty prediction.
std::vector<std::string> load_predictions(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report, const nlohmann::json& meta);
EvalReport report_from_json(const nlohmann::json& j);

} // namespace t2s
