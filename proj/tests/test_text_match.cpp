#include <doctest.h>

#include <string>
#include <vector>

#include "relaylab/text_match.hpp"

using namespace relaylab::text;

namespace {

std::vector<std::string> values(const std::vector<Token>& tokens) {
    std::vector<std::string> out;
    for (const auto& t : tokens) out.push_back(t.value);
    return out;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
    const auto tokens = tokenize("Hello, World!");
    CHECK(values(tokens) == std::vector<std::string>{"hello", "world"});
    CHECK(tokens[0].begin == 0);
    CHECK(tokens[0].end == 5);
    CHECK(tokens[1].begin == 7);
    CHECK(tokens[1].end == 12);
}

TEST_CASE("tokenize keeps currency and percent as single tokens") {
    const auto tokens = tokenize("The $4.7 million (23%) vote was 6-3.");
    CHECK(values(tokens) == std::vector<std::string>{"the", "$", "4", "7", "million", "23", "%",
                                                     "vote", "was", "6", "3"});
}

TEST_CASE("tokenize of empty and separator-only strings") {
    CHECK(tokenize("").empty());
    CHECK(tokenize(" ,.;!?\t\n").empty());
}

TEST_CASE("numeric forms decompose into digit runs") {
    CHECK(values(tokenize("4,700,000")) == std::vector<std::string>{"4", "700", "000"});
    CHECK(values(tokenize("$4.7M")) == std::vector<std::string>{"$", "4", "7m"});
}

TEST_CASE("contains_phrase matches contiguous token runs only") {
    CHECK(contains_phrase("The council voted 6-3 in favor", "6-3"));
    CHECK(contains_phrase("the vote was 6 to 3", "6 to 3"));
    CHECK_FALSE(contains_phrase("The council voted 63 in favor", "6-3"));
    CHECK(contains_phrase("significant cost overruns happened", "cost overruns"));
    CHECK_FALSE(contains_phrase("the cost of overruns", "cost overruns"));
}

TEST_CASE("contains_phrase is case-insensitive and punctuation-tolerant") {
    CHECK(contains_phrase("SEPTEMBER 2026.", "september 2026"));
    CHECK(contains_phrase("a \"trade-off\" exists", "trade-off"));
    CHECK(contains_phrase("the trade off exists", "trade-off"));
}

TEST_CASE("empty phrases never match") {
    const auto tokens = tokenize("anything at all");
    CHECK_FALSE(contains_phrase(tokens, compile_phrase("")));
    CHECK_FALSE(contains_phrase(tokens, compile_phrase("   ")));
    CHECK(find_phrase(tokens, compile_phrase("")).empty());
}

TEST_CASE("find_phrase reports every occurrence") {
    const auto tokens = tokenize("ha ha ha");
    const auto spans = find_phrase(tokens, compile_phrase("ha ha"));
    REQUIRE(spans.size() == 2);
    CHECK(spans[0].first == 0);
    CHECK(spans[0].last == 1);
    CHECK(spans[1].first == 1);
    CHECK(spans[1].last == 2);
}

TEST_CASE("count_non_overlapping scans left to right preferring longest") {
    const auto phrases = compile_phrases({"trade-off", "trade-offs"});
    CHECK(count_non_overlapping(tokenize("trade-offs and a trade-off"), phrases) == 2);

    const auto pair = compile_phrases({"a b", "b c"});
    CHECK(count_non_overlapping(tokenize("a b c"), pair) == 1);
    CHECK(count_non_overlapping(tokenize("a b c b c"), pair) == 2);
}

TEST_CASE("delete_spans removes and merges character ranges") {
    CHECK(delete_spans("abcdefgh", {{0, 3}}) == "defgh");
    CHECK(delete_spans("abcdefgh", {{0, 5}, {3, 8}}) == "");
    CHECK(delete_spans("abcdefgh", {{1, 3}, {5, 7}}) == "adeh");
    CHECK(delete_spans("abc", {}) == "abc");
}

TEST_CASE("word_count splits on whitespace") {
    CHECK(word_count("") == 0);
    CHECK(word_count("   ") == 0);
    CHECK(word_count("a b  c") == 3);
    CHECK(word_count("one\ntwo\tthree four") == 4);
}
