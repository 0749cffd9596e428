#include "counselforge/memory_ledger.hpp"

#include "counselforge/text.hpp"

#include <algorithm>
#include <optional>

namespace counselforge {

std::string to_string(MergeAction a) {
    switch (a) {
        case MergeAction::keep_history: return "keep_history";
        case MergeAction::take_current: return "take_current";
        case MergeAction::fuse: return "fuse";
        case MergeAction::drop_conflict: return "drop_conflict";
        case MergeAction::truncate: return "truncate";
    }
    return "";
}

Json to_json(const MergeDecision& d) {
    Json j;
    j["path"] = d.path;
    j["action"] = to_string(d.action);
    j["rationale_tag"] = d.rationale_tag;
    return j;
}

// ---------------------------------------------------------------------------
// Extraction firewalls
// ---------------------------------------------------------------------------

namespace {

bool matches_homework(const std::string& item, const std::vector<std::string>& homework,
                      double containment) {
    for (const auto& hw : homework) {
        if (hw.empty()) continue;
        if (item.find(hw) != std::string::npos || hw.find(item) != std::string::npos) return true;
        if (text::bigram_containment(item, hw) >= containment ||
            text::bigram_containment(hw, item) >= containment)
            return true;
    }
    return false;
}

bool has_future_marker(const std::string& item, const std::vector<std::string>& markers) {
    for (const auto& m : markers)
        if (!m.empty() && item.find(m) != std::string::npos) return true;
    return false;
}

void zero_block(ClientProfile& p, Therapy t) {
    switch (t) {
        case Therapy::cbt: p.cbt = {}; break;
        case Therapy::pdt: p.pdt = {}; break;
        case Therapy::het: p.het = {}; break;
        case Therapy::pmt: p.pmt = {}; break;
        case Therapy::bt: p.bt = {}; break;
        case Therapy::integrative: break;
    }
}

bool selected(const std::vector<Therapy>& theory_select, Therapy t) {
    return std::find(theory_select.begin(), theory_select.end(), t) != theory_select.end();
}

}  // namespace

ExtractionDelta apply_extraction_firewalls(ExtractionDelta delta,
                                           const std::vector<Therapy>& theory_select,
                                           int session_number,
                                           const std::vector<std::string>& prior_homework,
                                           const MemoryConfig& config, ValidationReport* audit) {
    ClientProfile& p = delta.client_info_get;
    if (session_number != 1) {
        if (!p.basic_info.main_problem.empty() || !p.basic_info.core_demands.empty() ||
            !p.basic_info.topic.empty()) {
            if (audit)
                audit->add("$.basic_info", "session_gating",
                           "session-1-only fields zeroed for session " +
                               std::to_string(session_number));
        }
        p.basic_info.main_problem.clear();
        p.basic_info.core_demands.clear();
        p.basic_info.topic.clear();
    }
    for (Therapy t : kProfileTherapies) {
        if (!selected(theory_select, t) && !p.theory_block_empty(t)) {
            if (audit)
                audit->add("$.theory." + to_string(t), "therapy_gating",
                           "block outside theory_select zeroed");
            zero_block(p, t);
        }
    }

    std::vector<std::string> kept;
    for (const auto& item : p.basic_info.growth_experiences) {
        if (matches_homework(item, prior_homework, config.homework_match_containment)) {
            if (audit)
                audit->add("$.basic_info.growth_experiences", "reality_therapy_firewall", item);
            continue;
        }
        if (has_future_marker(item, config.future_markers)) {
            if (audit)
                audit->add("$.basic_info.growth_experiences", "fact_expectation_firewall", item);
            continue;
        }
        kept.push_back(item);
    }
    p.basic_info.growth_experiences = std::move(kept);

    auto& medical = p.basic_info.static_traits.medical_history;
    if (!medical.empty()) {
        if (matches_homework(medical, prior_homework, config.homework_match_containment)) {
            if (audit)
                audit->add("$.basic_info.static_traits.medical_history", "reality_therapy_firewall",
                           medical);
            medical.clear();
        } else if (has_future_marker(medical, config.future_markers)) {
            if (audit)
                audit->add("$.basic_info.static_traits.medical_history",
                           "fact_expectation_firewall", medical);
            medical.clear();
        }
    }
    return delta;
}

ExtractionDelta extract_session_info(const SessionTranscript& transcript,
                                     const std::vector<Therapy>& theory_select, int session_number,
                                     const Gateway& gateway,
                                     const std::vector<std::string>& prior_homework,
                                     const MemoryConfig& config, ValidationReport* audit) {
    ChatRequest req;
    req.template_id = "client_memory_extraction";
    req.variables["current_session_number"] = session_number;
    Json theories = Json::array();
    for (Therapy t : theory_select) theories.push_back(to_string(t));
    req.variables["current_session_theory"] = theories;
    req.variables["current_session_dialogue"] = dialogue_to_json(transcript.utterances);

    ChatResponse resp = gateway.complete(req, [](const std::string& raw, Json& parsed)
                                                  -> std::optional<std::string> {
        Json payload;
        try {
            payload = extract_json_payload(raw);
        } catch (const CfError& e) {
            return std::string(e.what());
        }
        if (!payload.is_object() || !payload.contains("client_info_get"))
            return std::string("schema_violation: missing client_info_get");
        ValidationReport report;
        parse_profile(payload.at("client_info_get"), report, "$.client_info_get");
        if (!report.ok()) return "schema_violation: " + report.summary();
        parsed = payload;
        return std::nullopt;
    });

    ValidationReport report;
    ExtractionDelta delta;
    delta.client_info_get = parse_profile(resp.parsed.at("client_info_get"), report);
    return apply_extraction_firewalls(std::move(delta), theory_select, session_number,
                                      prior_homework, config, audit);
}

// ---------------------------------------------------------------------------
// Merge enforcement
// ---------------------------------------------------------------------------

int progress_priority(const std::string& progress) {
    const std::string p = text::trim(progress);
    if (p.find("已解决") != std::string::npos) return 3;
    if (p.find("待解决") != std::string::npos) return 2;
    if (p.find("未提及") != std::string::npos) return 1;
    return 0;
}

bool name_matches_global(const std::string& current_name, const std::string& global_name) {
    if (current_name.empty() || global_name.empty()) return false;
    if (current_name == global_name) return true;
    const auto cur = text::to_codepoints(current_name);
    const auto glob = text::to_codepoints(global_name);
    const char32_t family = glob.front();
    if (std::find(cur.begin(), cur.end(), family) != cur.end()) return true;
    // affective prefix on the full global name
    if (cur.size() == glob.size() + 1 && (cur.front() == U'小' || cur.front() == U'老') &&
        std::equal(glob.begin(), glob.end(), cur.begin() + 1))
        return true;
    return false;
}

namespace {

// value-level membership against a leaf set
bool in_leafset(const std::string& v, const std::vector<std::string>& leaves, double th) {
    for (const auto& s : leaves)
        if (text::semantically_same(v, s, th)) return true;
    return false;
}

std::string strip_indices(const std::string& path) {
    std::string out;
    bool in_brackets = false;
    for (char c : path) {
        if (c == '[')
            in_brackets = true;
        else if (c == ']')
            in_brackets = false;
        else if (!in_brackets)
            out.push_back(c);
    }
    return out;
}

// Anchor text identifying an object item within its list.
std::string anchor_of(const std::string& norm_path, const Json& item) {
    auto field = [&](const char* key) -> std::string {
        if (item.is_object() && item.contains(key) && item.at(key).is_string())
            return item.at(key).get<std::string>();
        return {};
    };
    if (norm_path == "theory.cbt.special_situations") return field("event");
    if (norm_path == "theory.pdt.object_relations")
        return field("self_representation") + "|" + field("object_representation");
    if (norm_path == "theory.pdt.behavioral_response_patterns")
        return field("trigger_condition") + "|" + field("defense_mechanism");
    if (norm_path == "theory.het.existentialism_topic") return field("theme");
    if (norm_path == "theory.het.contact_model") return field("mode");
    if (norm_path == "theory.pmt.exception_events") return field("target_problem");
    if (norm_path == "theory.bt.target_behavior") return field("behavior");
    return canonical_json(item);
}

// Fixed caps; N+2 caps are resolved from the global counterpart at call site.
std::optional<size_t> fixed_cap(const std::string& norm_path) {
    if (norm_path == "theory.pdt.core_conflict.defense_goal") return 3;
    if (norm_path == "theory.pdt.object_relations") return 4;
    if (norm_path == "theory.pdt.behavioral_response_patterns") return 5;
    if (norm_path == "theory.het.existentialism_topic.manifestations") return 5;
    if (norm_path == "theory.het.existentialism_topic.outcomes") return 5;
    if (norm_path == "theory.het.contact_model.manifestations") return 5;
    return std::nullopt;
}

bool has_relative_cap(const std::string& norm_path) {
    return norm_path == "theory.pmt.force_field.positive_force" ||
           norm_path == "theory.pmt.force_field.negative_force" ||
           norm_path == "theory.bt.target_behavior.antecedent";
}

// Leaves whose values come from bundled standard tables or dedicated rules,
// exempt from the generic no-leakage reversion.
bool leak_exempt(const std::string& norm_path) {
    if (norm_path == "basic_info.static_traits.name") return true;
    const auto ends_with = [&](const char* suffix) {
        const std::string s(suffix);
        return norm_path.size() >= s.size() &&
               norm_path.compare(norm_path.size() - s.size(), s.size(), s) == 0;
    };
    return ends_with(".defense_definition") || ends_with(".definition") ||
           ends_with(".cognitive_pattern") || ends_with(".progress");
}

struct EnforceContext {
    std::vector<std::string> history_leaves;
    std::vector<std::string> current_leaves;
    std::vector<std::string> global_leaves;
    double th = 0.6;
    const MemoryConfig* cfg = nullptr;
    std::vector<MergeDecision> decisions;
    // enforcement-labelled paths, consulted by the final diff
    std::map<std::string, MergeDecision> labelled;

    bool leaked(const std::string& v) const {
        if (v.empty()) return false;
        return !in_leafset(v, history_leaves, th) && !in_leafset(v, current_leaves, th) &&
               in_leafset(v, global_leaves, th);
    }

    void drop(const std::string& path, const std::string& value) {
        decisions.push_back({path, MergeAction::drop_conflict, "no_leakage:" + value});
    }
    void truncate(const std::string& path, const std::string& value) {
        decisions.push_back({path, MergeAction::truncate, "cap:" + value});
    }
    void label(const std::string& path, MergeAction action, const std::string& tag) {
        labelled[path] = {path, action, tag};
    }
};

bool is_string_array(const Json& a, const Json& b) {
    for (const Json* j : {&a, &b}) {
        if (j->is_array() && !j->empty()) return j->front().is_string();
    }
    return true;  // both empty: treat as a string list (no items to enforce)
}

Json enforce_node(const Json& merged, const Json& history, const Json& global,
                  const std::string& path, EnforceContext& ctx);

Json enforce_string(const Json& merged, const Json& history, const std::string& path,
                    EnforceContext& ctx) {
    const std::string m = merged.is_string() ? merged.get<std::string>() : "";
    const std::string h = history.is_string() ? history.get<std::string>() : "";
    if (m == h) return m;
    const std::string norm = strip_indices(path);
    if (!leak_exempt(norm) && ctx.leaked(m)) {
        ctx.drop(path, m);
        return h;
    }
    return m;
}

Json enforce_string_list(const Json& merged, const Json& history, const Json& global,
                         const std::string& path, EnforceContext& ctx) {
    const std::string norm = strip_indices(path);
    Json out = Json::array();
    if (merged.is_array()) {
        for (const auto& e : merged) {
            if (!e.is_string()) continue;
            const std::string v = e.get<std::string>();
            if (v.empty()) continue;
            if (!leak_exempt(norm) && ctx.leaked(v)) {
                ctx.drop(path, v);
                continue;
            }
            out.push_back(v);
        }
    }
    // Knowledge is monotone: a history item absent from the provider's merge
    // is restored unless an existing item already absorbs it.
    if (history.is_array()) {
        for (const auto& e : history) {
            if (!e.is_string()) continue;
            const std::string h = e.get<std::string>();
            if (h.empty()) continue;
            bool present = false;
            for (const auto& m : out)
                if (text::semantically_same(h, m.get<std::string>(), ctx.th)) present = true;
            if (!present) out.push_back(h);
        }
    }
    std::optional<size_t> cap = fixed_cap(norm);
    if (!cap && has_relative_cap(norm))
        cap = (global.is_array() ? global.size() : 0) + 2;
    if (cap) {
        while (out.size() > *cap) {
            ctx.truncate(path + "[" + std::to_string(out.size() - 1) + "]",
                         out.back().get<std::string>());
            out.erase(out.size() - 1);
        }
    }
    return out;
}

const Json* find_by_anchor(const Json& list, const std::string& norm_path,
                           const std::string& anchor, double th) {
    if (!list.is_array()) return nullptr;
    for (const auto& item : list) {
        if (text::semantically_same(anchor_of(norm_path, item), anchor, th)) return &item;
    }
    return nullptr;
}

Json enforce_object_list(const Json& merged, const Json& history, const Json& global,
                         const std::string& path, EnforceContext& ctx) {
    const std::string norm = strip_indices(path);
    Json out = Json::array();
    if (merged.is_array()) {
        size_t i = 0;
        for (const auto& item : merged) {
            const std::string item_path = path + "[" + std::to_string(i) + "]";
            ++i;
            if (!item.is_object()) continue;
            const std::string anchor = anchor_of(norm, item);
            const Json* h_match = find_by_anchor(history, norm, anchor, ctx.th);
            const Json* g_match = find_by_anchor(global, norm, anchor, ctx.th);
            const bool in_current = in_leafset(anchor, ctx.current_leaves, ctx.th);
            if (!h_match && !in_current && g_match) {
                // item known only to the ground truth: leakage
                ctx.drop(item_path, anchor);
                continue;
            }
            Json enforced = enforce_node(item, h_match ? *h_match : Json::object(),
                                         g_match ? *g_match : Json(), item_path, ctx);
            out.push_back(std::move(enforced));
        }
    }
    if (history.is_array()) {
        for (const auto& h_item : history) {
            if (!h_item.is_object()) continue;
            const std::string anchor = anchor_of(norm, h_item);
            if (!find_by_anchor(out, norm, anchor, ctx.th)) out.push_back(h_item);
        }
    }
    std::optional<size_t> cap = fixed_cap(norm);
    if (cap) {
        while (out.size() > *cap) {
            ctx.truncate(path + "[" + std::to_string(out.size() - 1) + "]",
                         anchor_of(norm, out.back()));
            out.erase(out.size() - 1);
        }
    }
    return out;
}

Json enforce_node(const Json& merged, const Json& history, const Json& global,
                  const std::string& path, EnforceContext& ctx) {
    if (merged.is_object()) {
        Json out = Json::object();
        for (const auto& [key, m_val] : merged.items()) {
            const std::string child_path = path.empty() ? key : path + "." + key;
            const Json& h_val = history.is_object() && history.contains(key) ? history.at(key)
                                                                             : Json();
            const Json& g_val = global.is_object() && global.contains(key) ? global.at(key)
                                                                           : Json();
            out[key] = enforce_node(m_val, h_val, g_val, child_path, ctx);
        }
        return out;
    }
    if (merged.is_array()) {
        if (is_string_array(merged, history))
            return enforce_string_list(merged, history, global, path, ctx);
        return enforce_object_list(merged, history, global, path, ctx);
    }
    if (merged.is_string()) return enforce_string(merged, history, path, ctx);
    return merged;
}

// ---------------------------------------------------------------------------
// Decision diff: one record per changed leaf / added item / vanished item.
// ---------------------------------------------------------------------------

void diff_decisions(const Json& history, const Json& merged, const std::string& path,
                    EnforceContext& ctx) {
    if (merged.is_object()) {
        for (const auto& [key, m_val] : merged.items()) {
            const std::string child = path.empty() ? key : path + "." + key;
            const Json& h_val = history.is_object() && history.contains(key) ? history.at(key)
                                                                             : Json();
            diff_decisions(h_val, m_val, child, ctx);
        }
        return;
    }
    if (merged.is_array()) {
        const std::string norm = strip_indices(path);
        const bool strings = is_string_array(merged, history);
        // additions
        size_t i = 0;
        for (const auto& m_item : merged) {
            const std::string item_path = path + "[" + std::to_string(i) + "]";
            ++i;
            if (strings) {
                if (!m_item.is_string()) continue;
                bool in_history = history.is_array() && in_leafset(m_item.get<std::string>(),
                                                                   [&] {
                                                                       std::vector<std::string> v;
                                                                       for (const auto& e : history)
                                                                           if (e.is_string())
                                                                               v.push_back(
                                                                                   e.get<std::string>());
                                                                       return v;
                                                                   }(),
                                                                   ctx.th);
                if (!in_history) {
                    const bool from_current =
                        in_leafset(m_item.get<std::string>(), ctx.current_leaves, ctx.th);
                    ctx.decisions.push_back({item_path,
                                             from_current ? MergeAction::take_current
                                                          : MergeAction::fuse,
                                             from_current ? "new_from_current" : "provider_fusion"});
                }
            } else {
                if (!m_item.is_object()) continue;
                const std::string anchor = anchor_of(norm, m_item);
                const Json* h_match = find_by_anchor(history, norm, anchor, ctx.th);
                if (!h_match) {
                    const bool from_current = in_leafset(anchor, ctx.current_leaves, ctx.th);
                    ctx.decisions.push_back({item_path,
                                             from_current ? MergeAction::take_current
                                                          : MergeAction::fuse,
                                             from_current ? "new_from_current" : "provider_fusion"});
                } else {
                    diff_decisions(*h_match, m_item, item_path, ctx);
                }
            }
        }
        // vanished history items not already covered by a drop/truncate record
        if (history.is_array()) {
            for (const auto& h_item : history) {
                const std::string h_anchor =
                    strings ? (h_item.is_string() ? h_item.get<std::string>() : std::string())
                            : anchor_of(norm, h_item);
                if (h_anchor.empty()) continue;
                bool present = false;
                for (const auto& m_item : merged) {
                    const std::string m_anchor =
                        strings ? (m_item.is_string() ? m_item.get<std::string>() : std::string())
                                : anchor_of(norm, m_item);
                    if (text::semantically_same(h_anchor, m_anchor, ctx.th)) present = true;
                }
                if (present) continue;
                bool logged = false;
                for (const auto& d : ctx.decisions) {
                    if (d.action != MergeAction::truncate && d.action != MergeAction::drop_conflict)
                        continue;
                    if (strip_indices(d.path) != norm) continue;
                    const size_t colon = d.rationale_tag.find(':');
                    const std::string value =
                        colon == std::string::npos ? "" : d.rationale_tag.substr(colon + 1);
                    if (text::semantically_same(value, h_anchor, ctx.th)) logged = true;
                }
                if (!logged)
                    ctx.decisions.push_back(
                        {path, MergeAction::fuse, "history_item_absorbed:" + h_anchor});
            }
        }
        return;
    }
    // scalar leaf
    const std::string m = merged.is_string() ? merged.get<std::string>() : canonical_json(merged);
    const std::string h = history.is_string() ? history.get<std::string>() : canonical_json(history);
    if (m == h) return;
    auto it = ctx.labelled.find(path);
    if (it != ctx.labelled.end()) {
        ctx.decisions.push_back(it->second);
        return;
    }
    const bool from_current = !m.empty() && in_leafset(m, ctx.current_leaves, ctx.th);
    ctx.decisions.push_back({path, from_current ? MergeAction::take_current : MergeAction::fuse,
                             from_current ? "scalar_from_current" : "scalar_fusion"});
}

}  // namespace

MergeResult enforce_merge_rules(const ClientProfile& provider_merged, const ClientProfile& history,
                                const ExtractionDelta& current, const ClientProfile& global_truth,
                                const std::vector<Therapy>& theory_select,
                                const MemoryConfig& config) {
    ClientProfile candidate = provider_merged;

    // (1) therapy gating: blocks outside theory_select revert to history.
    if (!selected(theory_select, Therapy::cbt)) candidate.cbt = history.cbt;
    if (!selected(theory_select, Therapy::pdt)) candidate.pdt = history.pdt;
    if (!selected(theory_select, Therapy::het)) candidate.het = history.het;
    if (!selected(theory_select, Therapy::pmt)) candidate.pmt = history.pmt;
    if (!selected(theory_select, Therapy::bt)) candidate.bt = history.bt;

    // (2) precedence: history wins once it knows these.
    if (!history.basic_info.main_problem.empty())
        candidate.basic_info.main_problem = history.basic_info.main_problem;
    if (!history.basic_info.core_demands.empty())
        candidate.basic_info.core_demands = history.basic_info.core_demands;
    if (!history.basic_info.topic.empty()) candidate.basic_info.topic = history.basic_info.topic;

    // (3) name propagation.
    const std::string& current_name = current.client_info_get.basic_info.static_traits.name;
    if (!current_name.empty() &&
        name_matches_global(current_name, global_truth.basic_info.static_traits.name))
        candidate.basic_info.static_traits.name = current_name;
    else
        candidate.basic_info.static_traits.name = history.basic_info.static_traits.name;

    EnforceContext ctx;
    ctx.th = config.dedup_threshold;
    ctx.cfg = &config;
    for (const auto& [_, v] : profile_leaves(history)) ctx.history_leaves.push_back(v);
    for (const auto& [_, v] : profile_leaves(current.client_info_get))
        ctx.current_leaves.push_back(v);
    for (const auto& [_, v] : profile_leaves(global_truth)) ctx.global_leaves.push_back(v);

    // (4)(5)(6): the JSON-level walk enforces caps, no-leakage and the frozen
    // structure (re-parsing through the typed profile at the end). Non-selected
    // blocks are literal history copies and bypass enforcement entirely.
    const Json candidate_json = to_json(candidate);
    const Json history_json = to_json(history);
    const Json global_json = to_json(global_truth);
    Json enforced = Json::object();
    enforced["basic_info"] =
        enforce_node(candidate_json.at("basic_info"), history_json.at("basic_info"),
                     global_json.at("basic_info"), "basic_info", ctx);
    Json theory = Json::object();
    for (Therapy t : kProfileTherapies) {
        const std::string key = to_string(t);
        if (selected(theory_select, t))
            theory[key] = enforce_node(candidate_json.at("theory").at(key),
                                       history_json.at("theory").at(key),
                                       global_json.at("theory").at(key), "theory." + key, ctx);
        else
            theory[key] = history_json.at("theory").at(key);
    }
    enforced["theory"] = std::move(theory);

    // progress comparator + standard definitions on the enforced tree.
    if (selected(theory_select, Therapy::cbt)) {
        auto& situations = enforced["theory"]["cbt"]["special_situations"];
        const auto& h_situations = history_json["theory"]["cbt"]["special_situations"];
        size_t i = 0;
        for (auto& item : situations) {
            const std::string item_path =
                "theory.cbt.special_situations[" + std::to_string(i) + "]";
            ++i;
            if (!item.is_object() || !item.contains("progress")) continue;
            const std::string anchor = anchor_of("theory.cbt.special_situations", item);
            const Json* h_match =
                find_by_anchor(h_situations, "theory.cbt.special_situations", anchor, ctx.th);
            if (!h_match || !h_match->contains("progress")) continue;
            const std::string mp = item.at("progress").get<std::string>();
            const std::string hp = h_match->at("progress").get<std::string>();
            if (progress_priority(mp) < progress_priority(hp)) {
                item["progress"] = hp;
                ctx.label(item_path + ".progress", MergeAction::keep_history, "progress_priority");
            }
        }
    }
    // Standard definitions replace provider paraphrase on new or changed
    // items; untouched history items keep their bytes (idempotence).
    if (selected(theory_select, Therapy::pdt) && !config.defense_definitions.empty()) {
        auto& patterns = enforced["theory"]["pdt"]["behavioral_response_patterns"];
        const auto& h_patterns = history_json["theory"]["pdt"]["behavioral_response_patterns"];
        size_t i = 0;
        for (auto& item : patterns) {
            const std::string item_path =
                "theory.pdt.behavioral_response_patterns[" + std::to_string(i) + "]";
            ++i;
            if (!item.is_object() || !item.contains("defense_mechanism")) continue;
            const std::string anchor = anchor_of("theory.pdt.behavioral_response_patterns", item);
            const Json* h_match = find_by_anchor(
                h_patterns, "theory.pdt.behavioral_response_patterns", anchor, ctx.th);
            const std::string current_def = item.at("defense_definition").get<std::string>();
            if (h_match && h_match->at("defense_definition").get<std::string>() == current_def)
                continue;
            auto it = config.defense_definitions.find(
                text::normalize_for_match(item.at("defense_mechanism").get<std::string>()));
            if (it != config.defense_definitions.end() && current_def != it->second) {
                item["defense_definition"] = it->second;
                ctx.label(item_path + ".defense_definition", MergeAction::fuse,
                          "standard_definition");
            }
        }
    }
    if (selected(theory_select, Therapy::het) && !config.contact_definitions.empty()) {
        auto& modes = enforced["theory"]["het"]["contact_model"];
        const auto& h_modes = history_json["theory"]["het"]["contact_model"];
        size_t i = 0;
        for (auto& item : modes) {
            const std::string item_path = "theory.het.contact_model[" + std::to_string(i) + "]";
            ++i;
            if (!item.is_object() || !item.contains("mode")) continue;
            const std::string anchor = anchor_of("theory.het.contact_model", item);
            const Json* h_match = find_by_anchor(h_modes, "theory.het.contact_model", anchor, ctx.th);
            const std::string current_def = item.at("definition").get<std::string>();
            if (h_match && h_match->at("definition").get<std::string>() == current_def) continue;
            auto it = config.contact_definitions.find(
                text::normalize_for_match(item.at("mode").get<std::string>()));
            if (it != config.contact_definitions.end() && current_def != it->second) {
                item["definition"] = it->second;
                ctx.label(item_path + ".definition", MergeAction::fuse, "standard_definition");
            }
        }
    }

    ValidationReport parse_report;
    MergeResult result;
    result.merged = parse_profile(enforced, parse_report);
    if (!parse_report.ok())
        throw CfError(errkind::cap_violation,
                      "enforced merge no longer parses: " + parse_report.summary());

    // Internal guard: caps must hold now, whatever the provider did.
    const auto& m = result.merged;
    const bool caps_ok =
        m.pdt.core_conflict.defense_goal.size() <= 3 && m.pdt.object_relations.size() <= 4 &&
        m.pdt.behavioral_response_patterns.size() <= 5 &&
        std::all_of(m.het.existentialism_topic.begin(), m.het.existentialism_topic.end(),
                    [](const ExistentialTopic& t) {
                        return t.manifestations.size() <= 5 && t.outcomes.size() <= 5;
                    }) &&
        std::all_of(m.het.contact_model.begin(), m.het.contact_model.end(),
                    [](const ContactMode& c) { return c.manifestations.size() <= 5; });
    if (!caps_ok) throw CfError(errkind::cap_violation, "cap check failed after enforcement");

    diff_decisions(to_json(history), enforced, "", ctx);
    result.decisions = std::move(ctx.decisions);
    return result;
}

MergeResult merge_profiles(const ClientProfile& history, const ExtractionDelta& current,
                           const ClientProfile& global_truth,
                           const std::vector<Therapy>& theory_select, const Gateway& gateway,
                           const MemoryConfig& config) {
    ChatRequest req;
    req.template_id = "client_merge";
    req.variables["history_profile"] = to_json(history);
    req.variables["current_profile"] = to_json(current.client_info_get);
    req.variables["global_profile"] = to_json(global_truth);
    Json theories = Json::array();
    for (Therapy t : theory_select) theories.push_back(to_string(t));
    req.variables["theory_select"] = theories;

    ChatResponse resp = gateway.complete(req, [](const std::string& raw, Json& parsed)
                                                  -> std::optional<std::string> {
        Json payload;
        try {
            payload = extract_json_payload(raw);
        } catch (const CfError& e) {
            return std::string(e.what());
        }
        if (!payload.is_object() || !payload.contains("client_info_merge"))
            return std::string("schema_violation: missing client_info_merge");
        ValidationReport report;
        parse_profile(payload.at("client_info_merge"), report, "$.client_info_merge");
        if (!report.ok()) return "schema_violation: " + report.summary();
        parsed = payload;
        return std::nullopt;
    });

    ValidationReport report;
    ClientProfile provider_merged = parse_profile(resp.parsed.at("client_info_merge"), report);
    return enforce_merge_rules(provider_merged, history, current, global_truth, theory_select,
                               config);
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

std::string homework_window_text(const SessionTranscript& transcript, const MemoryConfig& config) {
    const auto& u = transcript.utterances;
    if (u.empty()) return {};
    std::string window;
    if (config.homework_window_utterances > 0) {
        const size_t k = static_cast<size_t>(config.homework_window_utterances);
        const size_t begin = u.size() > k ? u.size() - k : 0;
        for (size_t i = begin; i < u.size(); ++i)
            if (u[i].role == Role::counselor) window += u[i].spoken_text + "\n";
        return window;
    }
    // maximal counselor suffix; if the dialogue ends with the client, fall
    // back to the last counselor utterance alone
    size_t end = u.size();
    size_t begin = end;
    while (begin > 0 && u[begin - 1].role == Role::counselor) --begin;
    if (begin == end) {
        for (size_t i = u.size(); i > 0; --i) {
            if (u[i - 1].role == Role::counselor) {
                begin = i - 1;
                end = i;
                break;
            }
        }
    }
    for (size_t i = begin; i < end; ++i) window += u[i].spoken_text + "\n";
    return window;
}

ValidationReport check_homework_provenance(const SessionSummary& summary,
                                           const SessionTranscript& transcript,
                                           const MemoryConfig& config) {
    ValidationReport report;
    const std::string window = homework_window_text(transcript, config);
    size_t i = 0;
    for (const auto& hw : summary.homework) {
        const bool ok = window.find(hw) != std::string::npos ||
                        text::bigram_containment(hw, window) >=
                            config.homework_match_containment;
        if (!ok)
            report.add("$.homework[" + std::to_string(i) + "]", "homework_provenance",
                       "not traceable to the closing counselor segment");
        ++i;
    }
    return report;
}

SessionSummary summarize_session(const SessionTranscript& transcript,
                                 const ClientProfile& unlocked,
                                 const std::vector<SessionSummary>& history_summaries,
                                 const SessionGoals& goals, const TherapeuticPlan& plan,
                                 const std::vector<Therapy>& theory_select, const Gateway& gateway,
                                 const MemoryConfig& config) {
    ChatRequest req;
    req.template_id = "dialogue_summary";
    Json theories = Json::array();
    for (Therapy t : theory_select) theories.push_back(to_string(t));
    req.variables["theory_select"] = theories;
    req.variables["unlocked_client_info"] = to_json(unlocked);
    Json history = Json::array();
    for (const auto& s : history_summaries) history.push_back(to_json(s));
    req.variables["history"] = history;
    req.variables["session_focus"] = to_json(goals);
    req.variables["session_dialogue"] = dialogue_to_json(transcript.utterances);
    req.variables["plan"] = to_json(plan);

    ChatResponse resp = gateway.complete(
        req, [&](const std::string& raw, Json& parsed) -> std::optional<std::string> {
            Json payload;
            try {
                payload = extract_json_payload(raw);
            } catch (const CfError& e) {
                return std::string(e.what());
            }
            ValidationReport report;
            SessionSummary s = parse_summary(payload, report);
            if (!report.ok()) return "schema_violation: " + report.summary();
            report = validate_summary(s, theory_select);
            if (!report.ok()) return "schema_violation: " + report.summary();
            report = check_homework_provenance(s, transcript, config);
            if (!report.ok()) return "homework_provenance: " + report.summary();
            parsed = payload;
            return std::nullopt;
        });

    ValidationReport report;
    return parse_summary(resp.parsed, report);
}

}  // namespace counselforge
