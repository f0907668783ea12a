#include "relaylab/text_match.hpp"

#include <algorithm>
#include <cctype>

namespace relaylab::text {

namespace {

bool is_token_char(unsigned char c) {
    return std::isalnum(c) != 0;
}

bool is_symbol_token(unsigned char c) {
    return c == '$' || c == '%';
}

}  // namespace

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (is_symbol_token(c)) {
            out.push_back({std::string(1, static_cast<char>(c)), i, i + 1});
            ++i;
        } else if (is_token_char(c)) {
            std::size_t begin = i;
            std::string value;
            while (i < s.size() && is_token_char(static_cast<unsigned char>(s[i]))) {
                value.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
                ++i;
            }
            out.push_back({std::move(value), begin, i});
        } else {
            ++i;
        }
    }
    return out;
}

Phrase compile_phrase(std::string_view phrase) {
    Phrase p;
    p.source = std::string(phrase);
    for (auto& t : tokenize(phrase)) p.tokens.push_back(std::move(t.value));
    return p;
}

std::vector<Phrase> compile_phrases(const std::vector<std::string>& phrases) {
    std::vector<Phrase> out;
    out.reserve(phrases.size());
    for (const auto& s : phrases) out.push_back(compile_phrase(s));
    return out;
}

std::vector<TokenSpan> find_phrase(const std::vector<Token>& tokens, const Phrase& phrase) {
    std::vector<TokenSpan> out;
    const std::size_t m = phrase.tokens.size();
    if (m == 0 || tokens.size() < m) return out;
    for (std::size_t i = 0; i + m <= tokens.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < m; ++j) {
            if (tokens[i + j].value != phrase.tokens[j]) {
                hit = false;
                break;
            }
        }
        if (hit) out.push_back({i, i + m - 1});
    }
    return out;
}

bool contains_phrase(const std::vector<Token>& tokens, const Phrase& phrase) {
    return !find_phrase(tokens, phrase).empty();
}

bool contains_phrase(std::string_view s, std::string_view phrase) {
    return contains_phrase(tokenize(s), compile_phrase(phrase));
}

std::size_t count_non_overlapping(const std::vector<Token>& tokens,
                                  const std::vector<Phrase>& phrases) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t best = 0;
        for (const auto& p : phrases) {
            const std::size_t m = p.tokens.size();
            if (m == 0 || m <= best || i + m > tokens.size()) continue;
            bool hit = true;
            for (std::size_t j = 0; j < m; ++j) {
                if (tokens[i + j].value != p.tokens[j]) {
                    hit = false;
                    break;
                }
            }
            if (hit) best = m;
        }
        if (best > 0) {
            ++count;
            i += best;
        } else {
            ++i;
        }
    }
    return count;
}

std::string delete_spans(std::string_view s, std::vector<CharSpan> spans) {
    std::sort(spans.begin(), spans.end(),
              [](const CharSpan& a, const CharSpan& b) { return a.begin < b.begin; });
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    for (const auto& span : spans) {
        if (span.begin > pos) out.append(s.substr(pos, span.begin - pos));
        pos = std::max(pos, std::min(span.end, s.size()));
    }
    if (pos < s.size()) out.append(s.substr(pos));
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t count = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        if (std::isspace(c) != 0) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

}  // namespace relaylab::text
