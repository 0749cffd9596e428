#include "counselforge/summary.hpp"

#include "counselforge/text.hpp"

#include <algorithm>

namespace counselforge {

const std::vector<std::string>& completion_status_labels() {
    static const std::vector<std::string> labels = {
        "完全达成 (Completed)", "部分达成 (Partially Completed)", "未达成 (Not Addressed)",
        "目标调整 (Goal Shifted)"};
    return labels;
}

Json to_json(const SessionSummary& s) {
    Json j;
    j["session_summary_abstract"] = s.session_summary_abstract;
    Json goal;
    goal["objective_recap"] = s.goal_assessment.objective_recap;
    goal["completion_status"] = s.goal_assessment.completion_status;
    goal["evidence_and_analysis"] = s.goal_assessment.evidence_and_analysis;
    j["goal_assessment"] = std::move(goal);
    Json state;
    state["affective_state"] = s.client_state_analysis.affective_state;
    state["behavioral_patterns"] = s.client_state_analysis.behavioral_patterns;
    state["therapeutic_alliance"] = s.client_state_analysis.therapeutic_alliance;
    state["unresolved_points_or_tensions"] = s.client_state_analysis.unresolved_points_or_tensions;
    state["cognitive_patterns"] = s.client_state_analysis.cognitive_patterns;
    state["subconscious_manifestation"] = s.client_state_analysis.subconscious_manifestation;
    state["personal_agency"] = s.client_state_analysis.personal_agency;
    state["existentialism_topic"] = s.client_state_analysis.existentialism_topic;
    state["target_behavior"] = s.client_state_analysis.target_behavior;
    j["client_state_analysis"] = std::move(state);
    j["homework"] = s.homework;
    return j;
}

namespace {

std::string must_string(const Json& j, const char* key, ValidationReport& report,
                        const std::string& base) {
    if (!j.contains(key)) {
        report.add(base + "." + key, "missing_key");
        return {};
    }
    if (!j.at(key).is_string()) {
        report.add(base + "." + key, "wrong_type", "expected string");
        return {};
    }
    return j.at(key).get<std::string>();
}

}  // namespace

SessionSummary parse_summary(const Json& j, ValidationReport& report, const std::string& base) {
    SessionSummary s;
    if (!j.is_object()) {
        report.add(base, "wrong_type", "expected object");
        return s;
    }
    s.session_summary_abstract = must_string(j, "session_summary_abstract", report, base);
    if (j.contains("goal_assessment") && j.at("goal_assessment").is_object()) {
        const auto& g = j.at("goal_assessment");
        const std::string gb = base + ".goal_assessment";
        s.goal_assessment.objective_recap = must_string(g, "objective_recap", report, gb);
        s.goal_assessment.completion_status = must_string(g, "completion_status", report, gb);
        s.goal_assessment.evidence_and_analysis = must_string(g, "evidence_and_analysis", report, gb);
    } else {
        report.add(base + ".goal_assessment", "missing_key");
    }
    if (j.contains("client_state_analysis") && j.at("client_state_analysis").is_object()) {
        const auto& c = j.at("client_state_analysis");
        const std::string cb = base + ".client_state_analysis";
        s.client_state_analysis.affective_state = must_string(c, "affective_state", report, cb);
        s.client_state_analysis.behavioral_patterns =
            must_string(c, "behavioral_patterns", report, cb);
        s.client_state_analysis.therapeutic_alliance =
            must_string(c, "therapeutic_alliance", report, cb);
        s.client_state_analysis.unresolved_points_or_tensions =
            must_string(c, "unresolved_points_or_tensions", report, cb);
        s.client_state_analysis.cognitive_patterns = must_string(c, "cognitive_patterns", report, cb);
        s.client_state_analysis.subconscious_manifestation =
            must_string(c, "subconscious_manifestation", report, cb);
        s.client_state_analysis.personal_agency = must_string(c, "personal_agency", report, cb);
        s.client_state_analysis.existentialism_topic =
            must_string(c, "existentialism_topic", report, cb);
        s.client_state_analysis.target_behavior = must_string(c, "target_behavior", report, cb);
    } else {
        report.add(base + ".client_state_analysis", "missing_key");
    }
    if (j.contains("homework") && j.at("homework").is_array()) {
        for (const auto& e : j.at("homework"))
            if (e.is_string()) s.homework.push_back(e.get<std::string>());
    } else {
        report.add(base + ".homework", "missing_key");
    }
    return s;
}

ValidationReport validate_summary(const SessionSummary& s,
                                  const std::vector<Therapy>& theory_select) {
    ValidationReport report;
    auto selected = [&](Therapy t) {
        return std::find(theory_select.begin(), theory_select.end(), t) != theory_select.end();
    };
    auto gate = [&](Therapy t, const std::string& value, const char* field) {
        if (!selected(t) && !value.empty())
            report.add(std::string("$.client_state_analysis.") + field, "therapy_gating",
                       std::string(field) + " filled but " + to_string(t) + " not selected");
    };
    gate(Therapy::cbt, s.client_state_analysis.cognitive_patterns, "cognitive_patterns");
    gate(Therapy::pdt, s.client_state_analysis.subconscious_manifestation,
         "subconscious_manifestation");
    gate(Therapy::pmt, s.client_state_analysis.personal_agency, "personal_agency");
    gate(Therapy::het, s.client_state_analysis.existentialism_topic, "existentialism_topic");
    gate(Therapy::bt, s.client_state_analysis.target_behavior, "target_behavior");

    // Every ；/; separated segment of completion_status must cite one of the
    // four enumerated statuses.
    const std::string& status = s.goal_assessment.completion_status;
    if (text::trim(status).empty()) {
        report.add("$.goal_assessment.completion_status", "empty_field");
    } else {
        std::vector<std::string> segments;
        std::string current;
        size_t i = 0;
        while (i < status.size()) {
            const size_t before = i;
            const char32_t cp = text::decode_utf8(status, i);
            if (cp == U';' || cp == U'；') {
                segments.push_back(current);
                current.clear();
            } else {
                current.append(status.substr(before, i - before));
            }
        }
        segments.push_back(current);
        size_t si = 0;
        for (const auto& raw : segments) {
            const std::string seg = text::trim(raw);
            if (seg.empty() || seg == "。" || seg == ".") {
                ++si;
                continue;
            }
            bool found = false;
            for (const auto& label : completion_status_labels())
                if (seg.find(label) != std::string::npos) found = true;
            if (!found)
                report.add("$.goal_assessment.completion_status", "unknown_completion_status",
                           "segment " + std::to_string(si) + ": " + seg);
            ++si;
        }
    }
    return report;
}

}  // namespace counselforge
