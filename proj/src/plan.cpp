#include "counselforge/plan.hpp"

#include "counselforge/text.hpp"

#include <algorithm>
#include <set>

namespace counselforge {

int TherapeuticPlan::total_sessions() const {
    int n = 0;
    for (const auto& s : stages) n += static_cast<int>(s.content.size());
    return n;
}

const SessionPlanContent* TherapeuticPlan::entry(int session_index) const {
    for (const auto& s : stages)
        for (const auto& c : s.content)
            if (c.session_index == session_index) return &c;
    return nullptr;
}

int TherapeuticPlan::stage_of_session(int session_index) const {
    for (const auto& s : stages)
        for (const auto& c : s.content)
            if (c.session_index == session_index) return s.stage_number;
    return 0;
}

static std::string session_key(int index) {
    return "第" + std::to_string(index) + "次_session_content";
}

Json to_json(const TherapeuticPlan& p) {
    Json arr = Json::array();
    for (const auto& s : p.stages) {
        Json js;
        js["stage_number"] = s.stage_number;
        js["stage_name"] = s.stage_name;
        js["sessions"] = s.sessions;
        Json content;
        for (const auto& c : s.content) {
            Json jc;
            Json theories = Json::array();
            for (Therapy t : c.theory_select) theories.push_back(to_string(t));
            jc["theory_select"] = std::move(theories);
            jc["theme"] = c.theme;
            jc["persona_links"] = c.persona_links;
            jc["case_material"] = c.case_material;
            jc["rationale"] = c.rationale;
            content[session_key(c.session_index)] = std::move(jc);
        }
        js["content"] = std::move(content);
        arr.push_back(std::move(js));
    }
    return arr;
}

namespace {

// "第7次_session_content" -> 7
int parse_session_key(const std::string& key) {
    const std::string prefix = "第";
    const std::string suffix = "次_session_content";
    if (key.rfind(prefix, 0) != 0) return 0;
    const size_t end = key.find(suffix);
    if (end == std::string::npos) return 0;
    const std::string digits = key.substr(prefix.size(), end - prefix.size());
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) return 0;
    if (digits.size() > 4) return 0;
    return std::stoi(digits);
}

}  // namespace

TherapeuticPlan parse_plan(const Json& j, ValidationReport& report, const std::string& base) {
    TherapeuticPlan plan;
    const Json* stages = &j;
    if (j.is_object() && j.contains("plan") && j.at("plan").is_array()) stages = &j.at("plan");
    if (!stages->is_array()) {
        report.add(base, "wrong_type", "expected stage array");
        return plan;
    }
    size_t si = 0;
    for (const auto& js : *stages) {
        const std::string sb = base + ".stages[" + std::to_string(si) + "]";
        PlanStage stage;
        if (!js.is_object()) {
            report.add(sb, "wrong_type", "expected object");
            ++si;
            continue;
        }
        if (js.contains("stage_number") && js.at("stage_number").is_number_integer())
            stage.stage_number = js.at("stage_number").get<int>();
        else
            report.add(sb + ".stage_number", "missing_key");
        if (js.contains("stage_name") && js.at("stage_name").is_string())
            stage.stage_name = js.at("stage_name").get<std::string>();
        else
            report.add(sb + ".stage_name", "missing_key");
        if (js.contains("sessions") && js.at("sessions").is_string())
            stage.sessions = js.at("sessions").get<std::string>();
        else
            report.add(sb + ".sessions", "missing_key");
        if (js.contains("content") && js.at("content").is_object()) {
            for (const auto& [key, jc] : js.at("content").items()) {
                const std::string cb = sb + ".content." + key;
                SessionPlanContent c;
                c.session_index = parse_session_key(key);
                if (c.session_index <= 0) {
                    report.add(cb, "bad_session_key", key);
                    continue;
                }
                if (!jc.is_object()) {
                    report.add(cb, "wrong_type", "expected object");
                    continue;
                }
                if (jc.contains("theory_select") && jc.at("theory_select").is_array()) {
                    size_t ti = 0;
                    for (const auto& e : jc.at("theory_select")) {
                        auto th = e.is_string() ? therapy_from_string(e.get<std::string>())
                                                : std::nullopt;
                        if (!th)
                            report.add(cb + ".theory_select[" + std::to_string(ti) + "]",
                                       "unknown_therapy_label",
                                       e.is_string() ? e.get<std::string>() : "");
                        else if (*th == Therapy::integrative)
                            report.add(cb + ".theory_select[" + std::to_string(ti) + "]",
                                       "integrative_in_plan",
                                       "plan entries select concrete therapies only");
                        else
                            c.theory_select.push_back(*th);
                        ++ti;
                    }
                } else {
                    report.add(cb + ".theory_select", "missing_key");
                }
                if (c.theory_select.empty())
                    report.add(cb + ".theory_select", "empty_theory_select");
                if (jc.contains("theme") && jc.at("theme").is_string())
                    c.theme = jc.at("theme").get<std::string>();
                else
                    report.add(cb + ".theme", "missing_key");
                if (c.theme.empty()) report.add(cb + ".theme", "empty_field");
                auto get_list = [&](const char* key2, std::vector<std::string>& out) {
                    if (jc.contains(key2) && jc.at(key2).is_array()) {
                        for (const auto& e : jc.at(key2))
                            if (e.is_string()) out.push_back(e.get<std::string>());
                        if (out.empty()) report.add(cb + "." + key2, "empty_field");
                    } else {
                        report.add(cb + "." + key2, "missing_key");
                    }
                };
                get_list("persona_links", c.persona_links);
                get_list("case_material", c.case_material);
                get_list("rationale", c.rationale);
                stage.content.push_back(std::move(c));
            }
            std::sort(stage.content.begin(), stage.content.end(),
                      [](const SessionPlanContent& a, const SessionPlanContent& b) {
                          return a.session_index < b.session_index;
                      });
        } else {
            report.add(sb + ".content", "missing_key");
        }
        plan.stages.push_back(std::move(stage));
        ++si;
    }

    if (plan.stages.size() != 3)
        report.add(base + ".stages", "stage_count",
                   "expected 3 stages, got " + std::to_string(plan.stages.size()));
    for (size_t i = 0; i < plan.stages.size() && i < 3; ++i) {
        if (plan.stages[i].stage_number != static_cast<int>(i) + 1)
            report.add(base + ".stages[" + std::to_string(i) + "].stage_number", "stage_number_order",
                       "expected " + std::to_string(i + 1) + ", got " +
                           std::to_string(plan.stages[i].stage_number));
    }
    // Session indices must form a contiguous 1..T run across stages, 5 <= T <= 10.
    std::vector<int> indices;
    for (const auto& s : plan.stages)
        for (const auto& c : s.content) indices.push_back(c.session_index);
    std::vector<int> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    bool contiguous = !sorted.empty();
    for (size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != static_cast<int>(i) + 1) contiguous = false;
    if (!contiguous)
        report.add(base + ".stages", "session_indices", "indices do not form a contiguous 1..T run");
    if (sorted != indices)
        report.add(base + ".stages", "session_order", "sessions out of chronological order");
    const int total = static_cast<int>(indices.size());
    if (total < 5 || total > 10)
        report.add(base + ".stages", "session_total",
                   "T=" + std::to_string(total) + " outside [5, 10]");
    return plan;
}

ValidationReport lint_plan(const TherapeuticPlan& p, const ClientProfile& ground_truth) {
    ValidationReport report;
    for (const auto& stage : p.stages) {
        for (const auto& c : stage.content) {
            const std::string cb = "$.session[" + std::to_string(c.session_index) + "]";
            for (Therapy t : c.theory_select) {
                if (ground_truth.theory_block_empty(t))
                    report.add(cb + ".theory_select", "theory_block_empty",
                               to_string(t) + " selected but empty in the ground-truth profile");
            }
        }
    }
    // Foreshadowing lint: when session n+1 links a profile area for the first
    // time, session n's case_material should end with a bridge task.
    auto area_of_link = [](const std::string& link) {
        const size_t colon = link.find(':');
        std::string key = colon == std::string::npos ? link : link.substr(0, colon);
        const size_t dot = key.find('.');
        if (dot != std::string::npos) key = key.substr(0, dot);
        return text::trim(key);
    };
    std::set<std::string> seen;
    const int total = p.total_sessions();
    for (int n = 1; n <= total; ++n) {
        const SessionPlanContent* cur = p.entry(n);
        if (!cur) continue;
        std::set<std::string> fresh;
        for (const auto& link : cur->persona_links) {
            const std::string area = area_of_link(link);
            if (!area.empty() && !seen.count(area)) fresh.insert(area);
        }
        if (!fresh.empty() && n > 1) {
            const SessionPlanContent* prev = p.entry(n - 1);
            const std::string tail =
                (prev && !prev->case_material.empty()) ? prev->case_material.back() : "";
            if (tail.find("铺垫") == std::string::npos && tail.find("下次") == std::string::npos)
                report.add("$.session[" + std::to_string(n - 1) + "].case_material",
                           "missing_bridge_task",
                           "session " + std::to_string(n) + " introduces new profile areas");
        }
        for (const auto& a : fresh) seen.insert(a);
    }
    return report;
}

}  // namespace counselforge
