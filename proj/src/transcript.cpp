#include "counselforge/transcript.hpp"

#include "counselforge/text.hpp"

namespace counselforge {

std::string to_string(Role r) { return r == Role::counselor ? "Counselor" : "Client"; }

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "Counselor") return Role::counselor;
    if (s == "Client") return Role::client;
    return std::nullopt;
}

Json to_json(const SessionGoals& g) {
    Json j;
    j["overall_stage"] = g.overall_stage;
    Json focus;
    focus["stage_title"] = g.stage_title;
    focus["objective"] = g.objective;
    j["session_focus"] = std::move(focus);
    return j;
}

SessionGoals parse_session_goals(const Json& j, ValidationReport& report, const std::string& base) {
    SessionGoals g;
    if (!j.is_object()) {
        report.add(base, "wrong_type", "expected object");
        return g;
    }
    if (j.contains("overall_stage") && j.at("overall_stage").is_string())
        g.overall_stage = j.at("overall_stage").get<std::string>();
    // Providers answer with {"session_focus": {...}}; stored goals carry
    // overall_stage alongside. Accept both shapes.
    const Json* focus = &j;
    if (j.contains("session_focus") && j.at("session_focus").is_object())
        focus = &j.at("session_focus");
    if (focus->contains("stage_title") && focus->at("stage_title").is_string())
        g.stage_title = focus->at("stage_title").get<std::string>();
    else
        report.add(base + ".stage_title", "missing_key");
    if (focus->contains("objective") && focus->at("objective").is_array()) {
        for (const auto& e : focus->at("objective"))
            if (e.is_string()) g.objective.push_back(e.get<std::string>());
    } else {
        report.add(base + ".objective", "missing_key");
    }
    return g;
}

size_t SessionTranscript::turn_count() const {
    size_t pairs = 0;
    for (size_t i = 0; i + 1 < utterances.size(); ++i)
        if (utterances[i].role == Role::counselor && utterances[i + 1].role == Role::client) ++pairs;
    return pairs;
}

Json dialogue_to_json(const std::vector<Utterance>& utterances) {
    Json arr = Json::array();
    for (const auto& u : utterances) {
        Json j;
        j["role"] = to_string(u.role);
        j["text"] = u.text;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<Utterance> parse_dialogue(const Json& j, ValidationReport& report,
                                      const std::string& base) {
    std::vector<Utterance> out;
    if (!j.is_array()) {
        report.add(base, "wrong_type", "expected array");
        return out;
    }
    size_t i = 0;
    for (const auto& ju : j) {
        const std::string ub = base + "[" + std::to_string(i) + "]";
        Utterance u;
        if (!ju.is_object() || !ju.contains("role") || !ju.at("role").is_string() ||
            !ju.contains("text") || !ju.at("text").is_string()) {
            report.add(ub, "wrong_type", "expected {role, text}");
            ++i;
            continue;
        }
        auto role = role_from_string(ju.at("role").get<std::string>());
        if (!role) {
            report.add(ub + ".role", "unknown_role", ju.at("role").get<std::string>());
            ++i;
            continue;
        }
        u.role = *role;
        u.text = ju.at("text").get<std::string>();
        if (u.role == Role::counselor) {
            auto parsed = parse_think_trace(u.text);
            if (std::holds_alternative<ThinkParsed>(parsed)) {
                auto& p = std::get<ThinkParsed>(parsed);
                u.think = std::move(p.trace);
                u.spoken_text = std::move(p.spoken_text);
            } else {
                u.think_error = std::get<ThinkError>(parsed);
                u.spoken_text = u.text;
            }
        } else {
            u.spoken_text = u.text;
            if (u.text.find("<think>") != std::string::npos)
                report.add(ub + ".text", "client_think_block",
                           "client utterance contains a think block");
        }
        out.push_back(std::move(u));
        ++i;
    }
    return out;
}

Json to_json(const SessionTranscript& t) {
    Json j;
    j["session_number"] = t.session_number;
    Json theories = Json::array();
    for (Therapy th : t.theory_select) theories.push_back(to_string(th));
    j["theory_select"] = std::move(theories);
    j["goals"] = to_json(t.goals);
    j["suggested_skills"] = to_json(t.suggested_skills);
    j["dialogue"] = dialogue_to_json(t.utterances);
    return j;
}

SessionTranscript parse_transcript(const Json& j, ValidationReport& report,
                                   const std::string& base) {
    SessionTranscript t;
    if (!j.is_object()) {
        report.add(base, "wrong_type", "expected object");
        return t;
    }
    if (j.contains("session_number") && j.at("session_number").is_number_integer())
        t.session_number = j.at("session_number").get<int>();
    else
        report.add(base + ".session_number", "missing_key");
    if (j.contains("theory_select") && j.at("theory_select").is_array()) {
        size_t i = 0;
        for (const auto& e : j.at("theory_select")) {
            auto th = e.is_string() ? therapy_from_string(e.get<std::string>()) : std::nullopt;
            if (!th || *th == Therapy::integrative)
                report.add(base + ".theory_select[" + std::to_string(i) + "]",
                           "unknown_therapy_label", e.is_string() ? e.get<std::string>() : "");
            else
                t.theory_select.push_back(*th);
            ++i;
        }
    } else {
        report.add(base + ".theory_select", "missing_key");
    }
    if (j.contains("goals"))
        t.goals = parse_session_goals(j.at("goals"), report, base + ".goals");
    else
        report.add(base + ".goals", "missing_key");
    if (j.contains("suggested_skills"))
        t.suggested_skills =
            parse_candidate_set(j.at("suggested_skills"), report, base + ".suggested_skills");
    else
        report.add(base + ".suggested_skills", "missing_key");
    if (j.contains("dialogue"))
        t.utterances = parse_dialogue(j.at("dialogue"), report, base + ".dialogue");
    else
        report.add(base + ".dialogue", "missing_key");
    return t;
}

ValidationReport validate_transcript(const SessionTranscript& t, const TranscriptBounds& bounds) {
    ValidationReport report;
    const auto& u = t.utterances;
    if (u.empty()) {
        report.add("$.dialogue", "empty_dialogue");
        return report;
    }
    if (u.front().role != Role::counselor)
        report.add("$.dialogue[0]", "opening_role", "dialogue must open with the counselor");
    for (size_t i = 0; i + 1 < u.size(); ++i) {
        if (u[i].role == u[i + 1].role)
            report.add("$.dialogue[" + std::to_string(i + 1) + "]", "alternation_break",
                       "consecutive " + to_string(u[i].role) + " utterances");
    }
    if (u.back().role != Role::counselor) {
        report.add("$.dialogue[" + std::to_string(u.size() - 1) + "]", "closing_role",
                   "final utterance must be the counselor's");
    } else if (text::ends_with_question_mark(u.back().spoken_text)) {
        report.add("$.dialogue[" + std::to_string(u.size() - 1) + "]", "closing_question",
                   "closing counselor line ends with a question mark");
    }
    for (size_t i = 0; i < u.size(); ++i) {
        if (u[i].role == Role::counselor && u[i].think_error)
            report.add("$.dialogue[" + std::to_string(i) + "]", "think_parse",
                       std::string(to_string(u[i].think_error->kind)) + ": " +
                           u[i].think_error->detail);
        if (u[i].role == Role::client && u[i].text.find("<think>") != std::string::npos)
            report.add("$.dialogue[" + std::to_string(i) + "]", "client_think_block");
    }
    const size_t turns = t.turn_count();
    if (turns < bounds.min_turns || turns > bounds.max_turns)
        report.add("$.dialogue", "turn_count",
                   std::to_string(turns) + " turns outside [" + std::to_string(bounds.min_turns) +
                       ", " + std::to_string(bounds.max_turns) + "]");
    return report;
}

bool is_hard_violation(const Violation& v) { return v.rule != "turn_count"; }

}  // namespace counselforge
