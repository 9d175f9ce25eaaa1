#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "t2s/corpus.hpp"
#include "t2s/error.hpp"
#include "t2s/util.hpp"

#include "testutil.hpp"

using namespace t2s;
namespace tu = t2s::testutil;
using nlohmann::json;

TEST_CASE("load_catalog reads a Spider tables.json") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());

    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);
    CHECK(catalog.size() == 3);

    const DatabaseSchema& cs = catalog.at("concert_singer");
    CHECK(cs.tables.size() == 4);
    CHECK(cs.tables[0] == "stadium");
    CHECK(cs.columns.size() == 22);
    CHECK(cs.columns[0].table_index == -1);
    CHECK(cs.columns[0].name == "*");
    CHECK(cs.columns[4].name == "Capacity");
    CHECK(cs.columns[4].value_type == ValueType::Number);
    CHECK(cs.primary_keys == std::vector<int>{1, 8, 15, 20});
    CHECK(cs.foreign_keys.size() == 3);
    CHECK(std::filesystem::exists(cs.db_file));

    auto stadium_cols = cs.table_columns(0);
    CHECK(stadium_cols == std::vector<std::string>{"Stadium_ID", "Location", "Name", "Capacity",
                                                   "Highest", "Lowest", "Average"});
}

TEST_CASE("load_catalog on an empty array yields an empty catalog") {
    tu::TempDir dir;
    util::write_file_atomic(dir.file("tables.json"), "[]");
    DatabaseCatalog catalog = load_catalog(dir.file("tables.json"), dir.path());
    CHECK(catalog.size() == 0);
}

TEST_CASE("load_catalog rejects malformed schemas") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());

    SUBCASE("out-of-range foreign key index") {
        json schema = tu::petshop_schema_json();
        schema["foreign_keys"] = json::array({{1, 999}});
        util::write_file_atomic(dir.file("bad.json"), json::array({schema}).dump());
        CHECK_THROWS_WITH_AS(load_catalog(dir.file("bad.json"), corpus.db_root),
                             doctest::Contains("999"), Error);
        try {
            load_catalog(dir.file("bad.json"), corpus.db_root);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MalformedSchema);
        }
    }
    SUBCASE("missing field") {
        json schema = tu::petshop_schema_json();
        schema.erase("column_types");
        util::write_file_atomic(dir.file("bad.json"), json::array({schema}).dump());
        CHECK_THROWS_AS(load_catalog(dir.file("bad.json"), corpus.db_root), Error);
    }
    SUBCASE("duplicate db_id") {
        json tables = json::array({tu::petshop_schema_json(), tu::petshop_schema_json()});
        util::write_file_atomic(dir.file("dup.json"), tables.dump());
        try {
            load_catalog(dir.file("dup.json"), corpus.db_root);
            FAIL("expected DuplicateDbId");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::DuplicateDbId);
        }
    }
    SUBCASE("missing database file") {
        json schema = tu::petshop_schema_json();
        schema["db_id"] = "ghost_db";
        util::write_file_atomic(dir.file("ghost.json"), json::array({schema}).dump());
        try {
            load_catalog(dir.file("ghost.json"), corpus.db_root);
            FAIL("expected MissingDatabaseFile");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MissingDatabaseFile);
        }
    }
    SUBCASE("declared table absent from the database file") {
        json schema = tu::petshop_schema_json();
        schema["table_names_original"].push_back("warehouse");
        util::write_file_atomic(dir.file("extra.json"), json::array({schema}).dump());
        try {
            load_catalog(dir.file("extra.json"), corpus.db_root);
            FAIL("expected MalformedSchema");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MalformedSchema);
        }
    }
    SUBCASE("foreign key pair within one table") {
        json schema = tu::petshop_schema_json();
        schema["foreign_keys"] = json::array({{1, 2}});
        util::write_file_atomic(dir.file("selffk.json"), json::array({schema}).dump());
        CHECK_THROWS_AS(load_catalog(dir.file("selffk.json"), corpus.db_root), Error);
    }
}

TEST_CASE("extra tables in the database file are tolerated") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    sqlite3* db = nullptr;
    sqlite3_open((corpus.db_root / "petshop" / "petshop.sqlite").string().c_str(), &db);
    tu::exec_sql(db, "CREATE TABLE undeclared_extra (x INTEGER)");
    sqlite3_close(db);
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);
    CHECK(catalog.at("petshop").tables.size() == 1);
}

TEST_CASE("load_examples assigns ids and validates records") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);

    json records = json::array({
        tu::example_record("How many singers do we have?", "SELECT count(*) FROM singer",
                           "concert_singer"),
        tu::example_record("How long did Rylan Goodwin's lesson last?",
                           "SELECT sum(lesson_time) FROM Lessons", "driving_school"),
    });
    auto path = tu::write_examples_file(dir.file("dev.json"), records);

    ExampleSet set = load_examples(path, catalog);
    REQUIRE(set.size() == 2);
    CHECK(set.at(0).id == "dev.json:0");
    CHECK(set.at(1).id == "dev.json:1");
    CHECK(set.at(0).source_tag == "original");
    CHECK(set.at(0).db_id == "concert_singer");
    CHECK(set.find("dev.json:1") != nullptr);
    CHECK(set.find("dev.json:9") == nullptr);

    SUBCASE("unknown db_id") {
        records.push_back(tu::example_record("q?", "SELECT 1", "no_such_db"));
        tu::write_examples_file(dir.file("bad.json"), records);
        try {
            load_examples(dir.file("bad.json"), catalog);
            FAIL("expected UnknownDbId");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::UnknownDbId);
        }
    }
    SUBCASE("blank question") {
        json bad = json::array({tu::example_record("   ", "SELECT 1", "petshop")});
        tu::write_examples_file(dir.file("blank.json"), bad);
        CHECK_THROWS_AS(load_examples(dir.file("blank.json"), catalog), Error);
    }
    SUBCASE("missing query field") {
        json bad = json::array({json{{"question", "q?"}, {"db_id", "petshop"}}});
        tu::write_examples_file(dir.file("noq.json"), bad);
        try {
            load_examples(dir.file("noq.json"), catalog);
            FAIL("expected MalformedExample");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::MalformedExample);
        }
    }
}

TEST_CASE("example set round-trips through the interchange format") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);

    json records = json::array({
        tu::example_record("Names of all shops?", "SELECT name FROM shop", "petshop"),
        tu::example_record("How many singers do we have?", "SELECT count(*) FROM singer",
                           "concert_singer"),
    });
    records[0]["category"] = "keyword-synonym";
    auto path = tu::write_examples_file(dir.file("set.json"), records);
    ExampleSet original = load_examples(path, catalog);

    save_examples(dir.file("set.json"), original, util::artifact_meta("cafe", 7));
    ExampleSet reloaded = load_examples(dir.file("set.json"), catalog);

    REQUIRE(reloaded.size() == original.size());
    for (size_t i = 0; i < original.size(); ++i) {
        CHECK(reloaded.at(i).id == original.at(i).id);
        CHECK(reloaded.at(i).db_id == original.at(i).db_id);
        CHECK(reloaded.at(i).question == original.at(i).question);
        CHECK(reloaded.at(i).gold_sql == original.at(i).gold_sql);
        CHECK(reloaded.at(i).source_tag == original.at(i).source_tag);
        CHECK(reloaded.at(i).category == original.at(i).category);
    }
}

TEST_CASE("canonicalize_sql lowercases keywords and collapses whitespace") {
    // Direct canonical-form oracle for the grouping key.
    CHECK(canonicalize_sql("SELECT  name\tFROM   shop") == "select name from shop");
    CHECK(canonicalize_sql("select name from shop") ==
          canonicalize_sql("SELECT name FROM shop"));
    // identifiers keep their case
    CHECK(canonicalize_sql("SELECT Name FROM Stadium") == "select Name from Stadium");
    // string literals are untouched, including keywords inside them
    CHECK(canonicalize_sql("SELECT * FROM t WHERE x = 'SELECT  ME'") ==
          "select * from t where x = 'SELECT  ME'");
    CHECK(canonicalize_sql("SELECT * FROM t WHERE x = \"FROM\"") ==
          "select * from t where x = \"FROM\"");
    // escaped quotes stay inside the literal
    CHECK(canonicalize_sql("SELECT 'it''s  ok' FROM t") == "select 'it''s  ok' from t");
    CHECK(canonicalize_sql("  SELECT 1  ") == "select 1");
}

TEST_CASE("group_by_intent groups duplicated questions for one gold query") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);

    // Two phrasings of one intent, as in duplicated-question training data.
    json records = json::array({
        tu::example_record("Find the personal names of students not enrolled in any course.",
                           "SELECT name FROM shop", "petshop"),
        tu::example_record(
            "Which students not enrolled in any course? Find their personal names.",
            "SELECT name FROM shop", "petshop"),
        tu::example_record("How many singers do we have?", "SELECT count(*) FROM singer",
                           "concert_singer"),
    });
    auto path = tu::write_examples_file(dir.file("train.json"), records);
    ExampleSet set = load_examples(path, catalog);

    auto groups = group_by_intent(set);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].member_ids.size() == 2);
    CHECK(groups[0].member_ids[0] == "train.json:0");
    CHECK(groups[1].member_ids.size() == 1);
}

TEST_CASE("whitespace and keyword-case variants share a group") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);

    std::string a = "SELECT name FROM shop";
    std::string b = "select  name\nfrom   shop";
    CHECK(canonicalize_sql(a) == canonicalize_sql(b));

    json records = json::array({
        tu::example_record("Shops?", a, "petshop"),
        tu::example_record("All shop names?", b, "petshop"),
    });
    auto path = tu::write_examples_file(dir.file("ws.json"), records);
    auto groups = group_by_intent(load_examples(path, catalog));
    CHECK(groups.size() == 1);
    CHECK(groups[0].member_ids.size() == 2);
}

TEST_CASE("group_by_intent partitions the set") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);

    // Mix of shared and distinct gold queries across databases.
    json records = json::array();
    const char* dbs[] = {"petshop", "concert_singer", "driving_school"};
    for (int i = 0; i < 30; ++i) {
        std::string db = dbs[i % 3];
        std::string sql = "SELECT " + std::to_string(i % 7) + " FROM " +
                          (db == std::string("petshop")
                               ? "shop"
                               : db == std::string("concert_singer") ? "singer" : "Lessons");
        records.push_back(tu::example_record("question " + std::to_string(i), sql, db));
    }
    auto path = tu::write_examples_file(dir.file("many.json"), records);
    ExampleSet set = load_examples(path, catalog);
    auto groups = group_by_intent(set);

    size_t total = 0;
    std::set<std::string> seen;
    for (const auto& g : groups) {
        CHECK(!g.member_ids.empty());
        total += g.member_ids.size();
        for (const auto& id : g.member_ids) {
            CHECK(seen.insert(id).second); // no id appears twice
            CHECK(set.find(id)->db_id == g.db_id);
        }
    }
    CHECK(total == set.size());
}

TEST_CASE("same SQL on different databases stays in different groups") {
    tu::TempDir dir;
    auto corpus = tu::make_fixture_corpus(dir.path());
    DatabaseCatalog catalog = load_catalog(corpus.tables_json, corpus.db_root);
    json records = json::array({
        tu::example_record("a?", "SELECT 1", "petshop"),
        tu::example_record("b?", "SELECT 1", "concert_singer"),
    });
    auto path = tu::write_examples_file(dir.file("two.json"), records);
    auto groups = group_by_intent(load_examples(path, catalog));
    CHECK(groups.size() == 2);
}
