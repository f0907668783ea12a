#include "relaylab/lexical_metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "relaylab/text_match.hpp"

namespace relaylab::lexical {

namespace {

bool is_bullet_line(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])) != 0) ++i;
    if (i >= line.size()) return false;

    // Unicode bullet U+2022 encodes as E2 80 A2.
    if (line.size() >= i + 3 && static_cast<unsigned char>(line[i]) == 0xE2 &&
        static_cast<unsigned char>(line[i + 1]) == 0x80 &&
        static_cast<unsigned char>(line[i + 2]) == 0xA2) {
        return true;
    }
    if (line[i] == '-' || line[i] == '*') {
        return i + 1 < line.size() && std::isspace(static_cast<unsigned char>(line[i + 1])) != 0;
    }
    if (std::isdigit(static_cast<unsigned char>(line[i])) != 0) {
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])) != 0) ++i;
        if (i >= line.size() || (line[i] != '.' && line[i] != ')')) return false;
        ++i;
        return i >= line.size() || std::isspace(static_cast<unsigned char>(line[i])) != 0;
    }
    return false;
}

}  // namespace

void validate_lexicon(const MarkerLexicon& lexicon) {
    std::set<std::string> seen;
    for (const auto& phrase : lexicon.phrases) {
        if (phrase.empty()) {
            throw std::invalid_argument("lexicon " + lexicon.name + " has an empty phrase");
        }
        for (unsigned char c : phrase) {
            if (std::isupper(c) != 0) {
                throw std::invalid_argument("lexicon " + lexicon.name +
                                            " phrase not lowercase: " + phrase);
            }
        }
        if (!seen.insert(phrase).second) {
            throw std::invalid_argument("lexicon " + lexicon.name + " duplicates: " + phrase);
        }
    }
}

double density(const std::string& text, const MarkerLexicon& lexicon) {
    const std::size_t words = text::word_count(text);
    if (words == 0) throw std::invalid_argument("density of empty text is undefined");
    const auto tokens = text::tokenize(text);
    const auto phrases = text::compile_phrases(lexicon.phrases);
    const std::size_t hits = text::count_non_overlapping(tokens, phrases);
    return 100.0 * static_cast<double>(hits) / static_cast<double>(words);
}

std::size_t count_structures(const std::string& text) {
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        if (is_bullet_line(std::string_view(text).substr(start, end - start))) ++count;
        if (end == text.size()) break;
        start = end + 1;
    }
    return count;
}

void validate_perspective(const PerspectiveSpec& spec) {
    if (spec.threshold == 0) throw std::invalid_argument("perspective threshold must be >= 1");
    if (spec.keywords.size() < spec.threshold) {
        throw std::invalid_argument("perspective " + spec.id +
                                    " has fewer keywords than its threshold");
    }
}

std::size_t count_perspectives(const std::string& text,
                               const std::vector<PerspectiveSpec>& specs) {
    const auto tokens = text::tokenize(text);
    std::size_t present = 0;
    for (const auto& spec : specs) {
        validate_perspective(spec);
        std::size_t distinct = 0;
        for (const auto& keyword : spec.keywords) {
            if (text::contains_phrase(tokens, text::compile_phrase(keyword))) ++distinct;
        }
        if (distinct >= spec.threshold) ++present;
    }
    return present;
}

bool tradeoff_flag(const std::string& text, const MarkerLexicon& tradeoff_phrases) {
    const auto tokens = text::tokenize(text);
    return std::any_of(tradeoff_phrases.phrases.begin(), tradeoff_phrases.phrases.end(),
                       [&](const std::string& phrase) {
                           return text::contains_phrase(tokens, text::compile_phrase(phrase));
                       });
}

}  // namespace relaylab::lexical
