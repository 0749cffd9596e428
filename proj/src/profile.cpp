#include "counselforge/profile.hpp"

#include <utility>

namespace counselforge {

std::string to_string(Therapy t) {
    switch (t) {
        case Therapy::cbt: return "cbt";
        case Therapy::pdt: return "pdt";
        case Therapy::het: return "het";
        case Therapy::pmt: return "pmt";
        case Therapy::bt: return "bt";
        case Therapy::integrative: return "integrative";
    }
    return "";
}

std::optional<Therapy> therapy_from_string(std::string_view s) {
    if (s == "cbt") return Therapy::cbt;
    if (s == "pdt") return Therapy::pdt;
    if (s == "het") return Therapy::het;
    if (s == "pmt") return Therapy::pmt;
    if (s == "bt") return Therapy::bt;
    if (s == "integrative") return Therapy::integrative;
    return std::nullopt;
}

const std::vector<std::string>& topic_labels() {
    static const std::vector<std::string> labels = {
        "人际关系", "婚姻关系", "家庭关系", "情绪管理", "个人成长",
        "社会事件", "职业发展", "自我探索", "学业压力"};
    return labels;
}

bool is_known_topic(std::string_view topic) {
    for (const auto& t : topic_labels())
        if (topic == t) return true;
    return false;
}

const std::vector<std::string>& cognitive_pattern_labels() {
    static const std::vector<std::string> labels = {
        "Catastrophizing",
        "All-or-Nothing Thinking",
        "Overgeneralization",
        "Personalization",
        "Mental Filtering",
        "Fortune Telling",
        "Mind Reading",
        "Disqualifying the Positive",
        "Jumping to Conclusions",
        "Emotional Reasoning",
        "\"Should\" Statements",
        "Comparing and Despairing",
        "Blaming",
        "Control Fallacy",
        "External Validation"};
    return labels;
}

bool is_known_cognitive_pattern(std::string_view p) {
    for (const auto& l : cognitive_pattern_labels())
        if (p == l) return true;
    return false;
}

bool ClientProfile::theory_block_empty(Therapy t) const {
    switch (t) {
        case Therapy::cbt: return cbt.empty();
        case Therapy::pdt: return pdt.empty();
        case Therapy::het: return het.empty();
        case Therapy::pmt: return pmt.empty();
        case Therapy::bt: return bt.empty();
        case Therapy::integrative: return true;
    }
    return true;
}

ClientProfile ClientProfile::empty_structured() { return ClientProfile{}; }

// ---------------------------------------------------------------------------
// Serialization. Key order is canonical and must not change: round-trip
// byte-stability depends on it.
// ---------------------------------------------------------------------------

Json to_json(const StaticTraits& t) {
    Json j;
    j["age"] = t.age;
    j["name"] = t.name;
    j["gender"] = t.gender;
    j["occupation"] = t.occupation;
    j["educational_background"] = t.educational_background;
    j["marital_status"] = t.marital_status;
    j["family_status"] = t.family_status;
    j["social_status"] = t.social_status;
    j["medical_history"] = t.medical_history;
    j["language_features"] = t.language_features;
    return j;
}

static Json to_json(const SpecialSituation& s) {
    Json j;
    j["event"] = s.event;
    j["conditional_assumptions"] = s.conditional_assumptions;
    j["compensatory_strategies"] = s.compensatory_strategies;
    j["automatic_thoughts"] = s.automatic_thoughts;
    j["cognitive_pattern"] = s.cognitive_pattern;
    if (s.progress) j["progress"] = *s.progress;
    if (s.analysis) j["analysis"] = *s.analysis;
    return j;
}

Json to_json(const ClientProfile& p) {
    Json j;
    Json basic;
    basic["static_traits"] = to_json(p.basic_info.static_traits);
    basic["main_problem"] = p.basic_info.main_problem;
    basic["topic"] = p.basic_info.topic;
    basic["core_demands"] = p.basic_info.core_demands;
    basic["growth_experiences"] = p.basic_info.growth_experiences;
    j["basic_info"] = std::move(basic);

    Json theory;
    {
        Json cbt;
        cbt["core_beliefs"] = p.cbt.core_beliefs;
        Json situations = Json::array();
        for (const auto& s : p.cbt.special_situations) situations.push_back(to_json(s));
        cbt["special_situations"] = std::move(situations);
        theory["cbt"] = std::move(cbt);
    }
    {
        Json pdt;
        Json conflict;
        conflict["wish"] = p.pdt.core_conflict.wish;
        conflict["fear"] = p.pdt.core_conflict.fear;
        conflict["defense_goal"] = p.pdt.core_conflict.defense_goal;
        pdt["core_conflict"] = std::move(conflict);
        Json relations = Json::array();
        for (const auto& r : p.pdt.object_relations) {
            Json jr;
            jr["self_representation"] = r.self_representation;
            jr["object_representation"] = r.object_representation;
            jr["linking_affect"] = r.linking_affect;
            relations.push_back(std::move(jr));
        }
        pdt["object_relations"] = std::move(relations);
        Json patterns = Json::array();
        for (const auto& b : p.pdt.behavioral_response_patterns) {
            Json jb;
            jb["trigger_condition"] = b.trigger_condition;
            jb["interpretation"] = b.interpretation;
            jb["defense_mechanism"] = b.defense_mechanism;
            jb["defense_definition"] = b.defense_definition;
            jb["response_instruction"] = b.response_instruction;
            patterns.push_back(std::move(jb));
        }
        pdt["behavioral_response_patterns"] = std::move(patterns);
        theory["pdt"] = std::move(pdt);
    }
    {
        Json het;
        Json topics = Json::array();
        for (const auto& t : p.het.existentialism_topic) {
            Json jt;
            jt["theme"] = t.theme;
            jt["manifestations"] = t.manifestations;
            jt["outcomes"] = t.outcomes;
            topics.push_back(std::move(jt));
        }
        het["existentialism_topic"] = std::move(topics);
        Json modes = Json::array();
        for (const auto& m : p.het.contact_model) {
            Json jm;
            jm["mode"] = m.mode;
            jm["definition"] = m.definition;
            jm["manifestations"] = m.manifestations;
            modes.push_back(std::move(jm));
        }
        het["contact_model"] = std::move(modes);
        theory["het"] = std::move(het);
    }
    {
        Json pmt;
        Json events = Json::array();
        for (const auto& e : p.pmt.exception_events) {
            Json je;
            je["target_problem"] = e.target_problem;
            je["unique_outcome"] = e.unique_outcome;
            je["reason"] = e.reason;
            events.push_back(std::move(je));
        }
        pmt["exception_events"] = std::move(events);
        Json force;
        force["positive_force"] = p.pmt.force_field.positive_force;
        force["negative_force"] = p.pmt.force_field.negative_force;
        pmt["force_field"] = std::move(force);
        theory["pmt"] = std::move(pmt);
    }
    {
        Json bt;
        Json behaviors = Json::array();
        for (const auto& b : p.bt.target_behavior) {
            Json jb;
            jb["behavior"] = b.behavior;
            jb["core_reason"] = b.core_reason;
            jb["function"] = b.function;
            jb["consequence"] = b.consequence;
            jb["antecedent"] = b.antecedent;
            behaviors.push_back(std::move(jb));
        }
        bt["target_behavior"] = std::move(behaviors);
        theory["bt"] = std::move(bt);
    }
    j["theory"] = std::move(theory);
    return j;
}

// ---------------------------------------------------------------------------
// Parsing with exhaustive violation collection
// ---------------------------------------------------------------------------

namespace {

std::string get_string(const Json& j, const std::string& key, ValidationReport& report,
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

std::vector<std::string> get_string_list(const Json& j, const std::string& key,
                                         ValidationReport& report, const std::string& base) {
    std::vector<std::string> out;
    if (!j.contains(key)) {
        report.add(base + "." + key, "missing_key");
        return out;
    }
    if (!j.at(key).is_array()) {
        report.add(base + "." + key, "wrong_type", "expected array of strings");
        return out;
    }
    size_t idx = 0;
    for (const auto& e : j.at(key)) {
        if (!e.is_string()) {
            report.add(base + "." + key + "[" + std::to_string(idx) + "]", "wrong_type",
                       "expected string");
        } else {
            out.push_back(e.get<std::string>());
        }
        ++idx;
    }
    return out;
}

const Json* get_object(const Json& j, const std::string& key, ValidationReport& report,
                       const std::string& base) {
    if (!j.contains(key)) {
        report.add(base + "." + key, "missing_key");
        return nullptr;
    }
    if (!j.at(key).is_object()) {
        report.add(base + "." + key, "wrong_type", "expected object");
        return nullptr;
    }
    return &j.at(key);
}

const Json* get_array(const Json& j, const std::string& key, ValidationReport& report,
                      const std::string& base) {
    if (!j.contains(key)) {
        report.add(base + "." + key, "missing_key");
        return nullptr;
    }
    if (!j.at(key).is_array()) {
        report.add(base + "." + key, "wrong_type", "expected array");
        return nullptr;
    }
    return &j.at(key);
}

}  // namespace

ClientProfile parse_profile(const Json& j, ValidationReport& report, const std::string& base) {
    ClientProfile p;
    if (!j.is_object()) {
        report.add(base, "wrong_type", "expected object");
        return p;
    }

    if (const Json* basic = get_object(j, "basic_info", report, base)) {
        const std::string bb = base + ".basic_info";
        if (const Json* st = get_object(*basic, "static_traits", report, bb)) {
            const std::string sb = bb + ".static_traits";
            auto& t = p.basic_info.static_traits;
            t.age = get_string(*st, "age", report, sb);
            t.name = get_string(*st, "name", report, sb);
            t.gender = get_string(*st, "gender", report, sb);
            t.occupation = get_string(*st, "occupation", report, sb);
            t.educational_background = get_string(*st, "educational_background", report, sb);
            t.marital_status = get_string(*st, "marital_status", report, sb);
            t.family_status = get_string(*st, "family_status", report, sb);
            t.social_status = get_string(*st, "social_status", report, sb);
            t.medical_history = get_string(*st, "medical_history", report, sb);
            t.language_features = get_string(*st, "language_features", report, sb);
        }
        p.basic_info.main_problem = get_string(*basic, "main_problem", report, bb);
        p.basic_info.topic = get_string(*basic, "topic", report, bb);
        if (!p.basic_info.topic.empty() && !is_known_topic(p.basic_info.topic))
            report.add(bb + ".topic", "unknown_topic", p.basic_info.topic);
        p.basic_info.core_demands = get_string(*basic, "core_demands", report, bb);
        p.basic_info.growth_experiences = get_string_list(*basic, "growth_experiences", report, bb);
    }

    const Json* theory = get_object(j, "theory", report, base);
    if (!theory) return p;
    const std::string tb = base + ".theory";

    if (const Json* cbt = get_object(*theory, "cbt", report, tb)) {
        const std::string cb = tb + ".cbt";
        p.cbt.core_beliefs = get_string_list(*cbt, "core_beliefs", report, cb);
        if (const Json* situations = get_array(*cbt, "special_situations", report, cb)) {
            size_t i = 0;
            for (const auto& js : *situations) {
                const std::string sb = cb + ".special_situations[" + std::to_string(i) + "]";
                SpecialSituation s;
                if (!js.is_object()) {
                    report.add(sb, "wrong_type", "expected object");
                } else {
                    s.event = get_string(js, "event", report, sb);
                    s.conditional_assumptions = get_string(js, "conditional_assumptions", report, sb);
                    s.compensatory_strategies = get_string(js, "compensatory_strategies", report, sb);
                    s.automatic_thoughts = get_string(js, "automatic_thoughts", report, sb);
                    s.cognitive_pattern = get_string(js, "cognitive_pattern", report, sb);
                    if (!s.cognitive_pattern.empty() &&
                        !is_known_cognitive_pattern(s.cognitive_pattern))
                        report.add(sb + ".cognitive_pattern", "unknown_cognitive_pattern",
                                   s.cognitive_pattern);
                    if (js.contains("progress")) {
                        if (js.at("progress").is_string())
                            s.progress = js.at("progress").get<std::string>();
                        else
                            report.add(sb + ".progress", "wrong_type", "expected string");
                    }
                    if (js.contains("analysis")) {
                        if (js.at("analysis").is_array()) {
                            std::vector<std::string> a;
                            for (const auto& e : js.at("analysis"))
                                if (e.is_string()) a.push_back(e.get<std::string>());
                            s.analysis = std::move(a);
                        } else {
                            report.add(sb + ".analysis", "wrong_type", "expected array");
                        }
                    }
                }
                p.cbt.special_situations.push_back(std::move(s));
                ++i;
            }
        }
    }

    if (const Json* pdt = get_object(*theory, "pdt", report, tb)) {
        const std::string pb = tb + ".pdt";
        if (const Json* conflict = get_object(*pdt, "core_conflict", report, pb)) {
            const std::string ccb = pb + ".core_conflict";
            p.pdt.core_conflict.wish = get_string(*conflict, "wish", report, ccb);
            p.pdt.core_conflict.fear = get_string(*conflict, "fear", report, ccb);
            p.pdt.core_conflict.defense_goal = get_string_list(*conflict, "defense_goal", report, ccb);
        }
        if (const Json* relations = get_array(*pdt, "object_relations", report, pb)) {
            size_t i = 0;
            for (const auto& jr : *relations) {
                const std::string rb = pb + ".object_relations[" + std::to_string(i) + "]";
                ObjectRelation r;
                if (!jr.is_object()) {
                    report.add(rb, "wrong_type", "expected object");
                } else {
                    r.self_representation = get_string(jr, "self_representation", report, rb);
                    r.object_representation = get_string(jr, "object_representation", report, rb);
                    r.linking_affect = get_string(jr, "linking_affect", report, rb);
                }
                p.pdt.object_relations.push_back(std::move(r));
                ++i;
            }
        }
        if (const Json* patterns = get_array(*pdt, "behavioral_response_patterns", report, pb)) {
            size_t i = 0;
            for (const auto& jp : *patterns) {
                const std::string rb = pb + ".behavioral_response_patterns[" + std::to_string(i) + "]";
                BehavioralResponsePattern b;
                if (!jp.is_object()) {
                    report.add(rb, "wrong_type", "expected object");
                } else {
                    b.trigger_condition = get_string(jp, "trigger_condition", report, rb);
                    b.interpretation = get_string(jp, "interpretation", report, rb);
                    b.defense_mechanism = get_string(jp, "defense_mechanism", report, rb);
                    b.defense_definition = get_string(jp, "defense_definition", report, rb);
                    b.response_instruction = get_string(jp, "response_instruction", report, rb);
                }
                p.pdt.behavioral_response_patterns.push_back(std::move(b));
                ++i;
            }
        }
    }

    if (const Json* het = get_object(*theory, "het", report, tb)) {
        const std::string hb = tb + ".het";
        if (const Json* topics = get_array(*het, "existentialism_topic", report, hb)) {
            size_t i = 0;
            for (const auto& jt : *topics) {
                const std::string eb = hb + ".existentialism_topic[" + std::to_string(i) + "]";
                ExistentialTopic t;
                if (!jt.is_object()) {
                    report.add(eb, "wrong_type", "expected object");
                } else {
                    t.theme = get_string(jt, "theme", report, eb);
                    t.manifestations = get_string_list(jt, "manifestations", report, eb);
                    t.outcomes = get_string_list(jt, "outcomes", report, eb);
                }
                p.het.existentialism_topic.push_back(std::move(t));
                ++i;
            }
        }
        if (const Json* modes = get_array(*het, "contact_model", report, hb)) {
            size_t i = 0;
            for (const auto& jm : *modes) {
                const std::string mb = hb + ".contact_model[" + std::to_string(i) + "]";
                ContactMode m;
                if (!jm.is_object()) {
                    report.add(mb, "wrong_type", "expected object");
                } else {
                    m.mode = get_string(jm, "mode", report, mb);
                    m.definition = get_string(jm, "definition", report, mb);
                    m.manifestations = get_string_list(jm, "manifestations", report, mb);
                }
                p.het.contact_model.push_back(std::move(m));
                ++i;
            }
        }
    }

    if (const Json* pmt = get_object(*theory, "pmt", report, tb)) {
        const std::string mb = tb + ".pmt";
        if (const Json* events = get_array(*pmt, "exception_events", report, mb)) {
            size_t i = 0;
            for (const auto& je : *events) {
                const std::string eb = mb + ".exception_events[" + std::to_string(i) + "]";
                ExceptionEvent e;
                if (!je.is_object()) {
                    report.add(eb, "wrong_type", "expected object");
                } else {
                    e.target_problem = get_string(je, "target_problem", report, eb);
                    e.unique_outcome = get_string(je, "unique_outcome", report, eb);
                    e.reason = get_string(je, "reason", report, eb);
                }
                p.pmt.exception_events.push_back(std::move(e));
                ++i;
            }
        }
        if (const Json* force = get_object(*pmt, "force_field", report, mb)) {
            const std::string fb = mb + ".force_field";
            p.pmt.force_field.positive_force = get_string_list(*force, "positive_force", report, fb);
            p.pmt.force_field.negative_force = get_string_list(*force, "negative_force", report, fb);
        }
    }

    if (const Json* bt = get_object(*theory, "bt", report, tb)) {
        const std::string bb = tb + ".bt";
        if (const Json* behaviors = get_array(*bt, "target_behavior", report, bb)) {
            size_t i = 0;
            for (const auto& jb : *behaviors) {
                const std::string vb = bb + ".target_behavior[" + std::to_string(i) + "]";
                TargetBehavior b;
                if (!jb.is_object()) {
                    report.add(vb, "wrong_type", "expected object");
                } else {
                    b.behavior = get_string(jb, "behavior", report, vb);
                    b.core_reason = get_string(jb, "core_reason", report, vb);
                    b.function = get_string(jb, "function", report, vb);
                    b.consequence = get_string(jb, "consequence", report, vb);
                    b.antecedent = get_string_list(jb, "antecedent", report, vb);
                }
                p.bt.target_behavior.push_back(std::move(b));
                ++i;
            }
        }
    }

    return p;
}

// ---------------------------------------------------------------------------
// Leaf enumeration
// ---------------------------------------------------------------------------

namespace {

void collect_leaves(const Json& j, const std::string& path,
                    std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (!s.empty()) out.emplace_back(path, s);
    } else if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            collect_leaves(v, path.empty() ? k : path + "." + k, out);
    } else if (j.is_array()) {
        size_t i = 0;
        for (const auto& v : j) {
            collect_leaves(v, path + "[" + std::to_string(i) + "]", out);
            ++i;
        }
    }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> profile_leaves(const ClientProfile& p,
                                                                const std::string& base) {
    std::vector<std::pair<std::string, std::string>> out;
    collect_leaves(to_json(p), base, out);
    return out;
}

}  // namespace counselforge
