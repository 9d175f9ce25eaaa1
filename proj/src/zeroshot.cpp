#include "t2s/zeroshot.hpp"

#include <cctype>

#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

std::string serialize_schema(const DatabaseSchema& schema) {
    std::string out = "### SQL tables, with their properties:\n#\n";
    for (size_t t = 0; t < schema.tables.size(); ++t) {
        out += "# " + schema.tables[t] + "(";
        bool first = true;
        for (const auto& col : schema.columns) {
            if (col.table_index != static_cast<int>(t)) continue;
            if (!first) out += ", ";
            out += col.name;
            first = false;
        }
        out += ")\n";
    }
    out += "#\n";
    return out;
}

ZeroShotPrompt build_prompt(const DatabaseSchema& schema, const std::string& question) {
    std::string q = util::single_line(question);
    if (q.empty()) fail(Errc::EmptyInput, "empty question for " + schema.db_id);
    ZeroShotPrompt prompt;
    prompt.db_id = schema.db_id;
    prompt.question = q;
    prompt.text = serialize_schema(schema) + "### " + q + " Return only a SQL query.\nSELECT";
    return prompt;
}

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Index of the first word-boundary "select", npos if absent.
size_t find_select(const std::string& s) {
    static const std::string kWord = "select";
    for (size_t i = 0; i + kWord.size() <= s.size(); ++i) {
        bool match = true;
        for (size_t k = 0; k < kWord.size(); ++k) {
            char c = s[i + k];
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            if (c != kWord[k]) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        if (i > 0 && is_ident_char(s[i - 1])) continue;
        if (i + kWord.size() < s.size() && is_ident_char(s[i + kWord.size()])) continue;
        return i;
    }
    return std::string::npos;
}

// Content of the first ``` fence, with an optional language tag dropped.
std::string unwrap_code_fence(const std::string& s) {
    size_t open = s.find("```");
    if (open == std::string::npos) return s;
    size_t body = s.find('\n', open);
    if (body == std::string::npos) {
        // single-line fence like ```SELECT 1```
        body = open + 3;
    } else {
        ++body;
    }
    size_t close = s.find("```", body);
    std::string inner =
        close == std::string::npos ? s.substr(body) : s.substr(body, close - body);
    // a bare language tag may still lead when the fence had no newline
    std::string trimmed = util::trim(inner);
    if (util::starts_with_word_ci(trimmed, "sql") && find_select(trimmed) != 0) {
        size_t after = 3;
        while (after < trimmed.size() &&
               std::isspace(static_cast<unsigned char>(trimmed[after]))) {
            ++after;
        }
        return trimmed.substr(after);
    }
    return inner;
}

} // namespace

std::string extract_sql(const std::string& response) {
    std::string text = unwrap_code_fence(response);
    text = util::rtrim(text);
    if (util::trim(text).empty()) fail(Errc::EmptyResponse, "no SQL in response");

    std::string result;
    size_t select_at = find_select(text);
    if (select_at != std::string::npos) {
        result = text.substr(select_at);
    } else {
        result = "SELECT " + text;
    }
    size_t semi = result.find(';');
    if (semi != std::string::npos) result = result.substr(0, semi);
    return util::rtrim(result);
}

} // namespace t2s
