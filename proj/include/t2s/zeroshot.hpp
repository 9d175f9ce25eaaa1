#pragma once

#include <string>

#include "t2s/corpus.hpp"

namespace t2s {

struct ZeroShotPrompt {
    std::string text;
    std::string db_id;
    std::string question;
};

// "### SQL tables, with their properties:" block, one "# table(cols...)"
// line per table in schema order, original casing.
std::string serialize_schema(const DatabaseSchema& schema);

// Schema block + "### <question> Return only a SQL query." + "\nSELECT".
// Newlines in the question collapse to spaces. Empty question is an error.
ZeroShotPrompt build_prompt(const DatabaseSchema& schema, const std::string& question);

// Salvages SQL from a chatty response: unwraps code fences, slices from the
// first SELECT (or prepends one), truncates at the first ';'.
std::string extract_sql(const std::string& response);

} // namespace t2s
