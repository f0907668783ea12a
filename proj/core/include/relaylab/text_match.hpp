#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace relaylab::text {

/// A lowercased token plus its character span in the original string.
///
/// Tokens are maximal runs of [a-z0-9] after lowercasing; '$' and '%' are
/// kept as single-character tokens because they carry meaning for money and
/// percentage patterns. All other characters act as separators, which makes
/// "4.7 million", "$4.7M" and "4,700,000" decompose into comparable runs.
struct Token {
    std::string value;
    std::size_t begin = 0;
    std::size_t end = 0;
};

std::vector<Token> tokenize(std::string_view s);

/// A phrase compiled to its token sequence.
struct Phrase {
    std::string source;
    std::vector<std::string> tokens;
};

Phrase compile_phrase(std::string_view phrase);
std::vector<Phrase> compile_phrases(const std::vector<std::string>& phrases);

/// Inclusive token range of a match.
struct TokenSpan {
    std::size_t first = 0;
    std::size_t last = 0;
};

/// All occurrences of `phrase` as a contiguous token run. Empty phrases never
/// match.
std::vector<TokenSpan> find_phrase(const std::vector<Token>& tokens, const Phrase& phrase);

bool contains_phrase(const std::vector<Token>& tokens, const Phrase& phrase);
bool contains_phrase(std::string_view s, std::string_view phrase);

/// Total non-overlapping occurrences of any phrase in the list, scanning left
/// to right and preferring the longest match at each position.
std::size_t count_non_overlapping(const std::vector<Token>& tokens,
                                  const std::vector<Phrase>& phrases);

/// Character span [begin, end).
struct CharSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Removes the given character spans from `s`. Overlapping spans are merged.
std::string delete_spans(std::string_view s, std::vector<CharSpan> spans);

/// Whitespace-delimited token count ("a b  c" has 3, "" has 0).
std::size_t word_count(std::string_view s);

}  // namespace relaylab::text
