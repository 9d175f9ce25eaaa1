#include "t2s/corpus.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_set>

#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

using nlohmann::json;

ValueType value_type_from_string(const std::string& s) {
    if (s == "text") return ValueType::Text;
    if (s == "number") return ValueType::Number;
    if (s == "time") return ValueType::Time;
    if (s == "boolean") return ValueType::Boolean;
    return ValueType::Others;
}

const char* value_type_name(ValueType t) {
    switch (t) {
        case ValueType::Text: return "text";
        case ValueType::Number: return "number";
        case ValueType::Time: return "time";
        case ValueType::Boolean: return "boolean";
        case ValueType::Others: return "others";
    }
    return "others";
}

std::vector<std::string> DatabaseSchema::table_columns(int table_index) const {
    std::vector<std::string> out;
    for (const auto& col : columns) {
        if (col.table_index == table_index) out.push_back(col.name);
    }
    return out;
}

void DatabaseCatalog::add(DatabaseSchema schema) {
    if (schemas_.count(schema.db_id)) {
        fail(Errc::DuplicateDbId, schema.db_id);
    }
    order_.push_back(schema.db_id);
    schemas_.emplace(schema.db_id, std::move(schema));
}

bool DatabaseCatalog::contains(const std::string& db_id) const {
    return schemas_.count(db_id) > 0;
}

const DatabaseSchema& DatabaseCatalog::at(const std::string& db_id) const {
    auto it = schemas_.find(db_id);
    if (it == schemas_.end()) fail(Errc::UnknownDbId, db_id);
    return it->second;
}

bool is_valid_source_tag(const std::string& tag) {
    static const std::unordered_set<std::string> kTags = {
        "original",      "simplify",  "hide-details",        "synonyms",
        "substitutions", "paraphrase", "express-differently", "from-examples",
    };
    return kTags.count(tag) > 0;
}

void ExampleSet::add(Example ex) {
    by_id_.emplace(ex.id, examples_.size());
    examples_.push_back(std::move(ex));
}

const Example* ExampleSet::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &examples_[it->second];
}

namespace {

const std::unordered_set<std::string>& sql_keywords() {
    static const std::unordered_set<std::string> kKeywords = {
        "select", "from", "where", "group", "by", "having", "order", "limit",
        "offset", "join", "inner", "outer", "left", "right", "full", "cross",
        "natural", "on", "using", "as", "and", "or", "not", "in", "exists",
        "between", "like", "glob", "is", "null", "distinct", "all", "union",
        "intersect", "except", "case", "when", "then", "else", "end", "cast",
        "asc", "desc", "count", "sum", "avg", "min", "max", "with", "recursive",
        "values", "coalesce", "ifnull",
    };
    return kKeywords;
}

bool is_word_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Copies a quoted region verbatim, honoring doubled-quote escapes.
size_t copy_literal(const std::string& sql, size_t i, std::string* out) {
    char q = sql[i];
    if (out) out->push_back(q);
    ++i;
    while (i < sql.size()) {
        char c = sql[i];
        if (out) out->push_back(c);
        ++i;
        if (c == q) {
            if (i < sql.size() && sql[i] == q) {
                if (out) out->push_back(q);
                ++i;
                continue;
            }
            break;
        }
    }
    return i;
}

} // namespace

std::string canonicalize_sql(const std::string& sql) {
    std::string out;
    out.reserve(sql.size());
    size_t i = 0;
    while (i < sql.size()) {
        char c = sql[i];
        if (c == '\'' || c == '"') {
            i = copy_literal(sql, i, &out);
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            while (i < sql.size() && std::isspace(static_cast<unsigned char>(sql[i]))) ++i;
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else if (is_word_start(c)) {
            size_t b = i;
            while (i < sql.size() && is_word_char(sql[i])) ++i;
            std::string word = sql.substr(b, i - b);
            std::string low = util::lower_ascii(word);
            out += sql_keywords().count(low) ? low : word;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

namespace {

// Table names present in the SQLite file, lowercased.
std::set<std::string> sqlite_table_names(const std::filesystem::path& db_file,
                                         const std::string& db_id) {
    sqlite3* db = nullptr;
    int rc = sqlite3_open_v2(db_file.string().c_str(), &db, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "open failed";
        sqlite3_close(db);
        fail(Errc::MissingDatabaseFile, db_id + ": cannot open " + db_file.string() + " (" + msg + ")");
    }
    std::set<std::string> names;
    sqlite3_stmt* stmt = nullptr;
    rc = sqlite3_prepare_v2(db, "SELECT name FROM sqlite_master WHERE type IN ('table','view')",
                            -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db);
        sqlite3_close(db);
        fail(Errc::MissingDatabaseFile, db_id + ": not a database: " + msg);
    }
    while (sqlite3_step(stmt) == SQLITE_ROW) {
        const char* name = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0));
        if (name) names.insert(util::lower_ascii(name));
    }
    sqlite3_finalize(stmt);
    sqlite3_close(db);
    return names;
}

const json& require_field(const json& record, const char* field, const std::string& where) {
    auto it = record.find(field);
    if (it == record.end()) {
        fail(Errc::MalformedSchema, where + ": missing field '" + field + "'");
    }
    return *it;
}

DatabaseSchema parse_schema_record(const json& record, const std::filesystem::path& db_root) {
    if (!record.is_object()) fail(Errc::MalformedSchema, "schema record is not an object");
    std::string where = record.value("db_id", std::string("<no db_id>"));

    DatabaseSchema schema;
    schema.db_id = require_field(record, "db_id", where).get<std::string>();
    where = schema.db_id;

    for (const auto& t : require_field(record, "table_names_original", where)) {
        if (!t.is_string()) fail(Errc::MalformedSchema, where + ": table name is not a string");
        schema.tables.push_back(t.get<std::string>());
    }

    const json& cols = require_field(record, "column_names_original", where);
    const json& types = require_field(record, "column_types", where);
    if (!cols.is_array() || !types.is_array() || cols.size() != types.size()) {
        fail(Errc::MalformedSchema, where + ": column_names_original/column_types mismatch");
    }
    for (size_t i = 0; i < cols.size(); ++i) {
        const json& entry = cols[i];
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number_integer() ||
            !entry[1].is_string()) {
            fail(Errc::MalformedSchema, where + ": bad column entry at index " + std::to_string(i));
        }
        ColumnRef col;
        col.table_index = entry[0].get<int>();
        col.name = entry[1].get<std::string>();
        col.value_type = value_type_from_string(types[i].get<std::string>());
        if (col.table_index < -1 || col.table_index >= static_cast<int>(schema.tables.size())) {
            fail(Errc::MalformedSchema,
                 where + ": column " + col.name + " cites table index " +
                     std::to_string(col.table_index));
        }
        if (col.table_index >= 0 && col.name.empty()) {
            fail(Errc::MalformedSchema, where + ": empty column name");
        }
        schema.columns.push_back(std::move(col));
    }

    auto check_col_index = [&](int idx, const char* what) {
        if (idx < 0 || idx >= static_cast<int>(schema.columns.size())) {
            fail(Errc::MalformedSchema,
                 where + ": " + what + " cites column index " + std::to_string(idx));
        }
    };
    for (const auto& pk : record.value("primary_keys", json::array())) {
        if (!pk.is_number_integer()) fail(Errc::MalformedSchema, where + ": bad primary key");
        int idx = pk.get<int>();
        check_col_index(idx, "primary_keys");
        schema.primary_keys.push_back(idx);
    }
    for (const auto& fk : record.value("foreign_keys", json::array())) {
        if (!fk.is_array() || fk.size() != 2 || !fk[0].is_number_integer() ||
            !fk[1].is_number_integer()) {
            fail(Errc::MalformedSchema, where + ": bad foreign key entry");
        }
        int a = fk[0].get<int>(), b = fk[1].get<int>();
        check_col_index(a, "foreign_keys");
        check_col_index(b, "foreign_keys");
        if (schema.columns[a].table_index == schema.columns[b].table_index) {
            fail(Errc::MalformedSchema, where + ": foreign key pair within one table");
        }
        schema.foreign_keys.emplace_back(a, b);
    }

    std::set<std::string> seen;
    for (const auto& t : schema.tables) {
        if (!seen.insert(util::lower_ascii(t)).second) {
            fail(Errc::MalformedSchema, where + ": duplicate table name " + t);
        }
    }

    schema.db_file = db_root / schema.db_id / (schema.db_id + ".sqlite");
    if (!std::filesystem::exists(schema.db_file)) {
        fail(Errc::MissingDatabaseFile, where + ": no file at " + schema.db_file.string());
    }
    // Declared tables must exist in the file; extra tables in the file are fine.
    auto actual = sqlite_table_names(schema.db_file, schema.db_id);
    for (const auto& t : schema.tables) {
        if (!actual.count(util::lower_ascii(t))) {
            fail(Errc::MalformedSchema, where + ": table " + t + " not found in database file");
        }
    }
    return schema;
}

} // namespace

DatabaseCatalog load_catalog(const std::filesystem::path& path,
                             const std::filesystem::path& db_root) {
    json doc;
    try {
        doc = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        fail(Errc::MalformedSchema, path.string() + ": " + e.what());
    }
    if (!doc.is_array()) fail(Errc::MalformedSchema, path.string() + ": expected a JSON array");

    DatabaseCatalog catalog;
    for (const auto& record : doc) {
        catalog.add(parse_schema_record(record, db_root));
    }
    return catalog;
}

ExampleSet load_examples(const std::filesystem::path& path, const DatabaseCatalog& catalog) {
    json doc;
    try {
        doc = json::parse(util::read_file(path));
    } catch (const json::exception& e) {
        fail(Errc::MalformedExample, path.string() + ": " + e.what());
    }
    // Accept both the bare Spider array and the toolkit's artifact envelope.
    const json* records = &doc;
    if (doc.is_object() && doc.contains("examples")) records = &doc["examples"];
    if (!records->is_array()) {
        fail(Errc::MalformedExample, path.string() + ": expected a JSON array of records");
    }

    std::string filename = path.filename().string();
    ExampleSet set;
    size_t index = 0;
    for (const auto& record : *records) {
        std::string where = filename + ":" + std::to_string(index);
        if (!record.is_object()) fail(Errc::MalformedExample, where + ": not an object");
        Example ex;
        ex.id = where;
        if (!record.contains("question") || !record["question"].is_string() ||
            !record.contains("query") || !record["query"].is_string() ||
            !record.contains("db_id") || !record["db_id"].is_string()) {
            fail(Errc::MalformedExample, where + ": needs string question/query/db_id");
        }
        ex.question = record["question"].get<std::string>();
        ex.gold_sql = record["query"].get<std::string>();
        ex.db_id = record["db_id"].get<std::string>();
        if (record.contains("category") && record["category"].is_string()) {
            ex.category = record["category"].get<std::string>();
        }
        if (record.contains("source_tag") && record["source_tag"].is_string()) {
            ex.source_tag = record["source_tag"].get<std::string>();
            if (!is_valid_source_tag(ex.source_tag)) {
                fail(Errc::MalformedExample, where + ": unknown source_tag " + ex.source_tag);
            }
        }
        if (!catalog.contains(ex.db_id)) fail(Errc::UnknownDbId, where + ": " + ex.db_id);
        if (util::collapse_whitespace(ex.question).empty()) {
            fail(Errc::MalformedExample, where + ": empty question");
        }
        if (util::trim(ex.gold_sql).empty()) {
            fail(Errc::MalformedExample, where + ": empty gold query");
        }
        set.add(std::move(ex));
        ++index;
    }
    return set;
}

void save_examples(const std::filesystem::path& path, const ExampleSet& set,
                   const nlohmann::json& meta) {
    json records = json::array();
    for (const auto& ex : set.items()) {
        json r{{"question", ex.question}, {"query", ex.gold_sql}, {"db_id", ex.db_id},
               {"source_tag", ex.source_tag}};
        if (ex.category) r["category"] = *ex.category;
        records.push_back(std::move(r));
    }
    json doc{{"meta", meta}, {"examples", std::move(records)}};
    util::write_file_atomic(path, doc.dump(2) + "\n");
}

std::vector<IntentGroup> group_by_intent(const ExampleSet& examples) {
    std::vector<IntentGroup> groups;
    std::unordered_map<std::string, size_t> index; // "db_id\x1f<canonical sql>" -> group
    for (const auto& ex : examples.items()) {
        std::string canonical = canonicalize_sql(ex.gold_sql);
        std::string key = ex.db_id + '\x1f' + canonical;
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, groups.size());
            groups.push_back(IntentGroup{ex.db_id, canonical, {ex.id}});
        } else {
            groups[it->second].member_ids.push_back(ex.id);
        }
    }
    return groups;
}

} // namespace t2s
