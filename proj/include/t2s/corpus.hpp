#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace t2s {

enum class ValueType { Text, Number, Time, Boolean, Others };

ValueType value_type_from_string(const std::string& s);
const char* value_type_name(ValueType t);

struct ColumnRef {
    int table_index = -1; // -1 for the global "*" column
    std::string name;
    ValueType value_type = ValueType::Others;
};

struct DatabaseSchema {
    std::string db_id;
    std::vector<std::string> tables;
    std::vector<ColumnRef> columns;
    std::vector<int> primary_keys;
    std::vector<std::pair<int, int>> foreign_keys;
    std::filesystem::path db_file;

    // Column names (original casing, schema order) belonging to one table.
    std::vector<std::string> table_columns(int table_index) const;
};

class DatabaseCatalog {
public:
    void add(DatabaseSchema schema);
    bool contains(const std::string& db_id) const;
    const DatabaseSchema& at(const std::string& db_id) const; // throws UnknownDbId
    size_t size() const { return order_.size(); }
    const std::vector<std::string>& db_ids() const { return order_; }

private:
    std::unordered_map<std::string, DatabaseSchema> schemas_;
    std::vector<std::string> order_;
};

struct Example {
    std::string id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    std::string source_tag = "original";
    std::optional<std::string> category;
};

// Valid source tags: original plus the seven augmentation kinds.
bool is_valid_source_tag(const std::string& tag);

class ExampleSet {
public:
    void add(Example ex);
    size_t size() const { return examples_.size(); }
    bool empty() const { return examples_.empty(); }
    const Example& at(size_t i) const { return examples_.at(i); }
    const Example* find(const std::string& id) const;
    const std::vector<Example>& items() const { return examples_; }

private:
    std::vector<Example> examples_;
    std::unordered_map<std::string, size_t> by_id_;
};

struct IntentGroup {
    std::string db_id;
    std::string canonical_sql;
    std::vector<std::string> member_ids; // input order
};

// Lowercases SQL keywords outside string literals and collapses whitespace.
// Identifiers and quoted literals keep their original bytes.
std::string canonicalize_sql(const std::string& sql);

// Spider tables.json -> validated catalog. Database files are expected at
// <db_root>/<db_id>/<db_id>.sqlite.
DatabaseCatalog load_catalog(const std::filesystem::path& path,
                             const std::filesystem::path& db_root);

// JSON array (or {"meta":..., "examples": [...]}) of {question, query, db_id}
// records. Ids are assigned as <filename>:<zero-based index>.
ExampleSet load_examples(const std::filesystem::path& path, const DatabaseCatalog& catalog);

// Writes the interchange form with an artifact meta header.
void save_examples(const std::filesystem::path& path, const ExampleSet& set,
                   const nlohmann::json& meta);

// Partition by (db_id, canonicalized gold SQL); groups ordered by first member.
std::vector<IntentGroup> group_by_intent(const ExampleSet& examples);

} // namespace t2s
