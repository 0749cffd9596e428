#include "counselforge/case_record.hpp"

namespace counselforge {

Json to_json(const DialogueFeature& f) {
    Json j;
    j["dialogue_number"] = f.dialogue_number;
    j["context"] = f.context;
    j["dialogue_content"] = f.dialogue_content;
    j["learning"] = f.learning;
    return j;
}

Json to_json(const CaseRecord& r) {
    Json j;
    j["case_id"] = r.case_id;
    j["therapy"] = to_string(r.therapy);
    j["client_info"] = to_json(r.client_info);
    j["global_plan"] = to_json(r.global_plan);
    Json features = Json::array();
    for (const auto& f : r.dialogue_features) features.push_back(to_json(f));
    j["dialogue_features"] = std::move(features);
    Json sessions = Json::array();
    for (const auto& s : r.sessions) {
        Json js;
        js["transcript"] = to_json(s.transcript);
        js["summary"] = to_json(s.summary);
        js["unlocked_after"] = to_json(s.unlocked_after);
        sessions.push_back(std::move(js));
    }
    j["sessions"] = std::move(sessions);
    return j;
}

CaseParseResult parse_case_record(const std::string& raw_json) {
    Json j = Json::parse(raw_json, nullptr, false);
    if (j.is_discarded()) {
        CaseParseResult out;
        out.report.add("$", "malformed_json");
        return out;
    }
    return parse_case_record(j);
}

CaseParseResult parse_case_record(const Json& j) {
    CaseParseResult out;
    auto& report = out.report;
    CaseRecord r;
    if (!j.is_object()) {
        report.add("$", "wrong_type", "expected object");
        return out;
    }

    if (j.contains("case_id") && j.at("case_id").is_string())
        r.case_id = j.at("case_id").get<std::string>();
    else
        report.add("$.case_id", "missing_key");

    if (j.contains("therapy") && j.at("therapy").is_string()) {
        auto t = therapy_from_string(j.at("therapy").get<std::string>());
        if (!t)
            report.add("$.therapy", "unknown_therapy_label", j.at("therapy").get<std::string>());
        else
            r.therapy = *t;
    } else {
        report.add("$.therapy", "missing_key");
    }

    if (j.contains("client_info"))
        r.client_info = parse_profile(j.at("client_info"), report, "$.client_info");
    else
        report.add("$.client_info", "missing_key");

    if (j.contains("global_plan"))
        r.global_plan = parse_plan(j.at("global_plan"), report, "$.global_plan");
    else
        report.add("$.global_plan", "missing_key");

    if (j.contains("dialogue_features") && j.at("dialogue_features").is_array()) {
        int last_number = 0;
        size_t i = 0;
        for (const auto& jf : j.at("dialogue_features")) {
            const std::string fb = "$.dialogue_features[" + std::to_string(i) + "]";
            DialogueFeature f;
            if (!jf.is_object()) {
                report.add(fb, "wrong_type", "expected object");
                ++i;
                continue;
            }
            if (jf.contains("dialogue_number") && jf.at("dialogue_number").is_number_integer())
                f.dialogue_number = jf.at("dialogue_number").get<int>();
            else
                report.add(fb + ".dialogue_number", "missing_key");
            if (f.dialogue_number < 1)
                report.add(fb + ".dialogue_number", "non_positive_number");
            else if (f.dialogue_number <= last_number)
                report.add(fb + ".dialogue_number", "non_increasing_number",
                           std::to_string(f.dialogue_number) + " after " +
                               std::to_string(last_number));
            last_number = f.dialogue_number;
            auto grab = [&](const char* key, std::string& dst) {
                if (jf.contains(key) && jf.at(key).is_string())
                    dst = jf.at(key).get<std::string>();
                else
                    report.add(fb + "." + key, "missing_key");
            };
            grab("context", f.context);
            grab("dialogue_content", f.dialogue_content);
            grab("learning", f.learning);
            r.dialogue_features.push_back(std::move(f));
            ++i;
        }
    } else {
        report.add("$.dialogue_features", "missing_key");
    }

    if (j.contains("sessions") && j.at("sessions").is_array()) {
        size_t i = 0;
        for (const auto& js : j.at("sessions")) {
            const std::string sb = "$.sessions[" + std::to_string(i) + "]";
            SessionEntry entry;
            if (!js.is_object()) {
                report.add(sb, "wrong_type", "expected object");
                ++i;
                continue;
            }
            if (js.contains("transcript"))
                entry.transcript = parse_transcript(js.at("transcript"), report, sb + ".transcript");
            else
                report.add(sb + ".transcript", "missing_key");
            if (js.contains("summary"))
                entry.summary = parse_summary(js.at("summary"), report, sb + ".summary");
            else
                report.add(sb + ".summary", "missing_key");
            if (js.contains("unlocked_after"))
                entry.unlocked_after =
                    parse_profile(js.at("unlocked_after"), report, sb + ".unlocked_after");
            else
                report.add(sb + ".unlocked_after", "missing_key");
            if (entry.transcript.session_number != static_cast<int>(i) + 1)
                report.add(sb + ".transcript.session_number", "session_sequence",
                           "expected " + std::to_string(i + 1) + ", got " +
                               std::to_string(entry.transcript.session_number));
            r.sessions.push_back(std::move(entry));
            ++i;
        }
        if (!r.sessions.empty() &&
            static_cast<int>(r.sessions.size()) > r.global_plan.total_sessions())
            report.add("$.sessions", "sessions_exceed_plan",
                       std::to_string(r.sessions.size()) + " sessions vs plan T=" +
                           std::to_string(r.global_plan.total_sessions()));
    } else {
        report.add("$.sessions", "missing_key");
    }

    if (report.ok()) out.record = std::move(r);
    return out;
}

}  // namespace counselforge
