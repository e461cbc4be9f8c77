#pragma once
// Text canonicalization used for answer matching, deduplication and cache
// keys. Canonical form: case-folded, trimmed, internal whitespace collapsed
// to single spaces, terminal punctuation stripped. Internal punctuation is
// preserved so clue semantics survive ("the cat's eyes" keeps its
// apostrophe).

#include <cctype>
#include <string>
#include <string_view>

namespace glassvqa {

namespace detail {

inline bool is_terminal_punct(char c) {
    switch (c) {
        case '.':
        case '!':
        case '?':
        case ',':
        case ';':
        case ':':
            return true;
        default:
            return false;
    }
}

}  // namespace detail

// Idempotent and total: canonicalize(canonicalize(x)) == canonicalize(x),
// and empty input yields the empty string.
inline std::string canonicalize(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    while (!out.empty() &&
           (detail::is_terminal_punct(out.back()) || out.back() == ' ')) {
        out.pop_back();
    }
    return out;
}

// A raw string paired with its canonical form.
struct CanonicalText {
    std::string raw;
    std::string canonical;

    static CanonicalText of(std::string_view raw) {
        return CanonicalText{std::string(raw), canonicalize(raw)};
    }
};

inline bool canonical_equal(std::string_view a, std::string_view b) {
    return canonicalize(a) == canonicalize(b);
}

}  // namespace glassvqa
