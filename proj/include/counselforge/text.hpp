#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace counselforge::text {

// Decodes one UTF-8 code point starting at byte offset i; advances i past it.
// Malformed bytes decode as U+FFFD and advance one byte.
char32_t decode_utf8(std::string_view s, size_t& i);

std::vector<char32_t> to_codepoints(std::string_view s);
std::string from_codepoints(const std::vector<char32_t>& cps);

bool is_cjk(char32_t c);
bool is_ascii_alnum(char32_t c);

// Word counting convention for corpus statistics: each CJK character counts
// as one word, each maximal run of non-CJK alphanumerics counts as one word,
// everything else counts zero.
size_t count_words(std::string_view s);

std::string trim(std::string_view s);

// trim + strip at most one trailing 。 or '.'  (the tolerance used when
// matching cited skill descriptions against the library).
std::string normalize_for_match(std::string_view s);

// Character bigram set of the normalized text. Single-char text contributes
// the char itself so short Chinese labels still compare.
std::unordered_set<std::string> char_bigrams(std::string_view s);

double bigram_jaccard(std::string_view a, std::string_view b);

// |bigrams(needle) ∩ bigrams(hay)| / |bigrams(needle)|, the containment score
// used for provenance checks where the haystack is much longer.
double bigram_containment(std::string_view needle, std::string_view hay);

// True when the string ends with '?' or '？' once closing quotes/brackets and
// whitespace are trimmed from the end.
bool ends_with_question_mark(std::string_view s);

// "Same item" relation for dedup/no-leakage: normalized equality, substring
// containment either way, or bigram jaccard >= threshold.
bool semantically_same(std::string_view a, std::string_view b, double threshold = 0.6);

}  // namespace counselforge::text
