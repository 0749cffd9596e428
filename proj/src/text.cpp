#include "counselforge/text.hpp"

#include <algorithm>

namespace counselforge::text {

char32_t decode_utf8(std::string_view s, size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (size_t k = 1; k < len; ++k) {
        const auto bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

std::vector<char32_t> to_codepoints(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size() / 2);
    size_t i = 0;
    while (i < s.size()) out.push_back(decode_utf8(s, i));
    return out;
}

static void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string from_codepoints(const std::vector<char32_t>& cps) {
    std::string out;
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

bool is_cjk(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) ||   // unified ideographs
           (c >= 0x3400 && c <= 0x4DBF) ||   // extension A
           (c >= 0xF900 && c <= 0xFAFF) ||   // compatibility ideographs
           (c >= 0x20000 && c <= 0x2A6DF);   // extension B
}

bool is_ascii_alnum(char32_t c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z');
}

size_t count_words(std::string_view s) {
    size_t words = 0;
    bool in_run = false;
    size_t i = 0;
    while (i < s.size()) {
        const char32_t cp = decode_utf8(s, i);
        if (is_cjk(cp)) {
            ++words;
            in_run = false;
        } else if (is_ascii_alnum(cp)) {
            if (!in_run) {
                ++words;
                in_run = true;
            }
        } else {
            in_run = false;
        }
    }
    return words;
}

static bool is_space_cp(char32_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == 0x3000 || c == 0xA0;
}

std::string trim(std::string_view s) {
    auto cps = to_codepoints(s);
    size_t b = 0, e = cps.size();
    while (b < e && is_space_cp(cps[b])) ++b;
    while (e > b && is_space_cp(cps[e - 1])) --e;
    return from_codepoints({cps.begin() + static_cast<long>(b), cps.begin() + static_cast<long>(e)});
}

std::string normalize_for_match(std::string_view s) {
    auto cps = to_codepoints(s);
    size_t b = 0, e = cps.size();
    while (b < e && is_space_cp(cps[b])) ++b;
    while (e > b && is_space_cp(cps[e - 1])) --e;
    if (e > b && (cps[e - 1] == U'。' || cps[e - 1] == U'.')) --e;
    while (e > b && is_space_cp(cps[e - 1])) --e;
    return from_codepoints({cps.begin() + static_cast<long>(b), cps.begin() + static_cast<long>(e)});
}

std::unordered_set<std::string> char_bigrams(std::string_view s) {
    std::unordered_set<std::string> grams;
    const auto cps = to_codepoints(normalize_for_match(s));
    if (cps.empty()) return grams;
    if (cps.size() == 1) {
        grams.insert(from_codepoints(cps));
        return grams;
    }
    for (size_t i = 0; i + 1 < cps.size(); ++i) grams.insert(from_codepoints({cps[i], cps[i + 1]}));
    return grams;
}

double bigram_jaccard(std::string_view a, std::string_view b) {
    const auto ga = char_bigrams(a);
    const auto gb = char_bigrams(b);
    if (ga.empty() && gb.empty()) return 1.0;
    if (ga.empty() || gb.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& g : ga) inter += gb.count(g);
    return static_cast<double>(inter) / static_cast<double>(ga.size() + gb.size() - inter);
}

double bigram_containment(std::string_view needle, std::string_view hay) {
    const auto gn = char_bigrams(needle);
    if (gn.empty()) return 1.0;
    const auto gh = char_bigrams(hay);
    size_t inter = 0;
    for (const auto& g : gn) inter += gh.count(g);
    return static_cast<double>(inter) / static_cast<double>(gn.size());
}

static bool is_closing_wrapper(char32_t c) {
    switch (c) {
        case U'"':
        case U'\'':
        case U'”':
        case U'’':
        case U'」':
        case U'』':
        case U'》':
        case U')':
        case U'）':
        case U']':
        case U'】':
        case U'}':
            return true;
        default:
            return false;
    }
}

bool ends_with_question_mark(std::string_view s) {
    auto cps = to_codepoints(s);
    size_t e = cps.size();
    while (e > 0 && (is_space_cp(cps[e - 1]) || is_closing_wrapper(cps[e - 1]))) --e;
    if (e == 0) return false;
    return cps[e - 1] == U'?' || cps[e - 1] == U'？';
}

bool semantically_same(std::string_view a, std::string_view b, double threshold) {
    const std::string na = normalize_for_match(a);
    const std::string nb = normalize_for_match(b);
    if (na.empty() || nb.empty()) return na == nb;
    if (na == nb) return true;
    if (na.find(nb) != std::string::npos || nb.find(na) != std::string::npos) return true;
    return bigram_jaccard(na, nb) >= threshold;
}

}  // namespace counselforge::text
