#include <doctest.h>

#include <filesystem>
#include <string>

#include "relaylab/csv.hpp"

using namespace relaylab::csv;

TEST_CASE("escape_field quotes only when needed") {
    CHECK(escape_field("plain") == "plain");
    CHECK(escape_field("") == "");
    CHECK(escape_field("a,b") == "\"a,b\"");
    CHECK(escape_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(escape_field("line\nbreak") == "\"line\nbreak\"");
}

TEST_CASE("to_string then parse round-trips tricky fields") {
    Table table;
    table.header = {"id", "text", "value"};
    table.rows.push_back({"1", "hello, world", "3.5"});
    table.rows.push_back({"2", "quote \"inside\"", ""});
    table.rows.push_back({"3", "multi\nline", "-1"});

    const Table parsed = parse(to_string(table));
    CHECK(parsed.header == table.header);
    REQUIRE(parsed.rows.size() == table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CHECK(parsed.rows[i] == table.rows[i]);
    }
}

TEST_CASE("parse handles crlf and skips blank lines") {
    const Table t = parse("a,b\r\n1,2\r\n\r\n3,4\r\n");
    CHECK(t.header == Row{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == Row{"1", "2"});
    CHECK(t.rows[1] == Row{"3", "4"});
}

TEST_CASE("parse rejects unterminated quotes") {
    CHECK_THROWS(parse("a,b\n\"open,2\n"));
}

TEST_CASE("column lookup by header name") {
    Table table;
    table.header = {"run", "t", "value"};
    CHECK(table.column("t") == 1);
    CHECK_THROWS_AS(table.column("missing"), std::out_of_range);
}

TEST_CASE("write_file and read_file round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "relaylab_csv_test";
    std::filesystem::remove_all(dir);
    Table table;
    table.header = {"k", "v"};
    table.rows.push_back({"x", "1,2"});
    const auto path = dir / "nested" / "t.csv";
    write_file(path, table);
    const Table back = read_file(path);
    CHECK(back.header == table.header);
    CHECK(back.rows == table.rows);
    std::filesystem::remove_all(dir);
}
