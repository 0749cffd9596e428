#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace counselforge {

struct SkillRef {
    int skill_id = 0;
    std::string description;

    bool operator==(const SkillRef&) const = default;
};

// The counselor's four-part internal reasoning block preceding each spoken
// utterance: <think><assessment/><client_state/><skill/><strategy/></think>.
struct ThinkTrace {
    std::string assessment;
    std::string client_state;
    std::vector<SkillRef> skill_refs;  // 1 or 2 entries
    std::string strategy;

    bool operator==(const ThinkTrace&) const = default;
};

enum class ThinkErrorKind { missing_think_block, tag_order_violation, skill_ref_syntax };

struct ThinkError {
    ThinkErrorKind kind;
    std::string detail;
};

const char* to_string(ThinkErrorKind k);

struct ThinkParsed {
    ThinkTrace trace;
    std::string spoken_text;
};

// counselor_text must begin with the think block; spoken_text is everything
// after </think>, trimmed.
std::variant<ThinkParsed, ThinkError> parse_think_trace(std::string_view counselor_text);

// Inverse of parse_think_trace for valid traces: parse(render(t) + spoken)
// recovers t and spoken exactly (descriptions must not contain ';' / '；').
std::string render_think_trace(const ThinkTrace& t);

}  // namespace counselforge
