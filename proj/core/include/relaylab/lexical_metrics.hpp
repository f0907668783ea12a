#pragma once

#include <map>
#include <string>
#include <vector>

namespace relaylab::lexical {

/// A named list of marker phrases (lowercase, no duplicates).
struct MarkerLexicon {
    std::string name;
    std::vector<std::string> phrases;
};

void validate_lexicon(const MarkerLexicon& lexicon);

/// Marker occurrences per 100 words: 100 * (non-overlapping case-insensitive
/// phrase occurrences) / word_count. Empty text is an error, not a zero.
double density(const std::string& text, const MarkerLexicon& lexicon);

/// Lines that impose structure: leading "N." / "N)" numbering or a bullet
/// glyph (-, *, or a unicode bullet) followed by whitespace.
std::size_t count_structures(const std::string& text);

/// A viewpoint with identifying vocabulary. The perspective counts as present
/// when at least `threshold` distinct keywords match.
struct PerspectiveSpec {
    std::string id;
    std::vector<std::string> keywords;
    std::size_t threshold = 2;
};

void validate_perspective(const PerspectiveSpec& spec);

std::size_t count_perspectives(const std::string& text,
                               const std::vector<PerspectiveSpec>& specs);

/// True when the text carries an explicit trade-off acknowledgment (any
/// phrase from the trade-off list, e.g. "trade-off" or a no-free-lunch
/// phrasing).
bool tradeoff_flag(const std::string& text, const MarkerLexicon& tradeoff_phrases);

/// The default marker lexicons keyed by name: framework, perspectival,
/// instructional, tension, tradeoff.
using LexiconSet = std::map<std::string, MarkerLexicon>;

}  // namespace relaylab::lexical
