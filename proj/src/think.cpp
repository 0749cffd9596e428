#include "counselforge/think.hpp"

#include "counselforge/text.hpp"

#include <array>

namespace counselforge {

const char* to_string(ThinkErrorKind k) {
    switch (k) {
        case ThinkErrorKind::missing_think_block: return "missing_think_block";
        case ThinkErrorKind::tag_order_violation: return "tag_order_violation";
        case ThinkErrorKind::skill_ref_syntax: return "skill_ref_syntax";
    }
    return "";
}

namespace {

// Splits the skill field on ';' / '；' into "id:description" segments.
std::variant<std::vector<SkillRef>, ThinkError> parse_skill_field(std::string_view field) {
    std::vector<std::string> segments;
    std::string current;
    size_t i = 0;
    while (i < field.size()) {
        size_t before = i;
        const char32_t cp = text::decode_utf8(field, i);
        if (cp == U';' || cp == U'；') {
            segments.push_back(current);
            current.clear();
        } else {
            current.append(field.substr(before, i - before));
        }
    }
    segments.push_back(current);

    std::vector<SkillRef> refs;
    for (const auto& raw : segments) {
        const std::string seg = text::trim(raw);
        if (seg.empty()) continue;
        size_t colon = seg.find(':');
        const size_t wide_colon = seg.find("\xEF\xBC\x9A");  // '：'
        size_t skip = 1;
        if (wide_colon != std::string::npos && (colon == std::string::npos || wide_colon < colon)) {
            colon = wide_colon;
            skip = 3;
        }
        if (colon == std::string::npos)
            return ThinkError{ThinkErrorKind::skill_ref_syntax, "missing ':' in \"" + seg + "\""};
        const std::string id_part = text::trim(seg.substr(0, colon));
        const std::string desc = text::trim(seg.substr(colon + skip));
        if (id_part.empty() || id_part.size() > 9 ||
            id_part.find_first_not_of("0123456789") != std::string::npos)
            return ThinkError{ThinkErrorKind::skill_ref_syntax, "non-integer id \"" + id_part + "\""};
        if (desc.empty())
            return ThinkError{ThinkErrorKind::skill_ref_syntax, "empty description for id " + id_part};
        refs.push_back({std::stoi(id_part), desc});
    }
    if (refs.empty()) return ThinkError{ThinkErrorKind::skill_ref_syntax, "no skill refs"};
    if (refs.size() > 2)
        return ThinkError{ThinkErrorKind::skill_ref_syntax,
                          std::to_string(refs.size()) + " refs, at most 2 allowed"};
    return refs;
}

}  // namespace

std::variant<ThinkParsed, ThinkError> parse_think_trace(std::string_view counselor_text) {
    const std::string body = text::trim(counselor_text);
    constexpr std::string_view open = "<think>";
    constexpr std::string_view close = "</think>";
    if (body.rfind(open, 0) != 0)
        return ThinkError{ThinkErrorKind::missing_think_block, "text does not start with <think>"};
    const size_t end = body.find(close);
    if (end == std::string::npos)
        return ThinkError{ThinkErrorKind::missing_think_block, "missing </think>"};
    const std::string_view inner = std::string_view(body).substr(open.size(), end - open.size());

    static constexpr std::array<std::string_view, 4> tags = {"assessment", "client_state", "skill",
                                                             "strategy"};
    std::array<std::string, 4> fields;
    size_t pos = 0;
    for (size_t t = 0; t < tags.size(); ++t) {
        const std::string open_tag = "<" + std::string(tags[t]) + ">";
        const std::string close_tag = "</" + std::string(tags[t]) + ">";
        // Only whitespace may sit between consecutive tags.
        while (pos < inner.size() && (inner[pos] == ' ' || inner[pos] == '\n' || inner[pos] == '\r' ||
                                      inner[pos] == '\t'))
            ++pos;
        if (inner.substr(pos, open_tag.size()) != open_tag)
            return ThinkError{ThinkErrorKind::tag_order_violation,
                              "expected <" + std::string(tags[t]) + "> at position " +
                                  std::to_string(pos)};
        pos += open_tag.size();
        const size_t closing = inner.find(close_tag, pos);
        if (closing == std::string::npos)
            return ThinkError{ThinkErrorKind::tag_order_violation,
                              "missing </" + std::string(tags[t]) + ">"};
        fields[t] = std::string(inner.substr(pos, closing - pos));
        pos = closing + close_tag.size();
    }
    while (pos < inner.size() &&
           (inner[pos] == ' ' || inner[pos] == '\n' || inner[pos] == '\r' || inner[pos] == '\t'))
        ++pos;
    if (pos != inner.size())
        return ThinkError{ThinkErrorKind::tag_order_violation, "trailing content inside think block"};

    auto skills = parse_skill_field(fields[2]);
    if (std::holds_alternative<ThinkError>(skills)) return std::get<ThinkError>(skills);

    ThinkParsed out;
    out.trace.assessment = fields[0];
    out.trace.client_state = fields[1];
    out.trace.skill_refs = std::get<std::vector<SkillRef>>(std::move(skills));
    out.trace.strategy = fields[3];
    out.spoken_text = text::trim(body.substr(end + close.size()));
    return out;
}

std::string render_think_trace(const ThinkTrace& t) {
    std::string skill;
    for (size_t i = 0; i < t.skill_refs.size(); ++i) {
        if (i) skill += "; ";
        skill += std::to_string(t.skill_refs[i].skill_id) + ":" + t.skill_refs[i].description;
    }
    return "<think><assessment>" + t.assessment + "</assessment><client_state>" + t.client_state +
           "</client_state><skill>" + skill + "</skill><strategy>" + t.strategy +
           "</strategy></think>";
}

}  // namespace counselforge
