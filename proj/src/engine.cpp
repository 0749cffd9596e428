#include "counselforge/engine.hpp"

#include "counselforge/text.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace counselforge {

namespace fs = std::filesystem;

CaseSeed parse_case_seed(const Json& j, ValidationReport& report) {
    CaseSeed seed;
    if (!j.is_object()) {
        report.add("$", "wrong_type", "expected object");
        return seed;
    }
    if (j.contains("case_id") && j.at("case_id").is_string())
        seed.case_id = j.at("case_id").get<std::string>();
    else
        report.add("$.case_id", "missing_key");
    if (j.contains("therapy") && j.at("therapy").is_string()) {
        auto t = therapy_from_string(j.at("therapy").get<std::string>());
        if (t)
            seed.therapy = *t;
        else
            report.add("$.therapy", "unknown_therapy_label", j.at("therapy").get<std::string>());
    } else {
        report.add("$.therapy", "missing_key");
    }
    if (j.contains("client_info"))
        seed.client_info = parse_profile(j.at("client_info"), report, "$.client_info");
    else
        report.add("$.client_info", "missing_key");
    if (j.contains("global_plan"))
        seed.global_plan = parse_plan(j.at("global_plan"), report, "$.global_plan");
    else
        report.add("$.global_plan", "missing_key");
    if (j.contains("dialogue_features") && j.at("dialogue_features").is_array()) {
        size_t i = 0;
        for (const auto& jf : j.at("dialogue_features")) {
            DialogueFeature f;
            if (jf.is_object()) {
                if (jf.contains("dialogue_number") && jf.at("dialogue_number").is_number_integer())
                    f.dialogue_number = jf.at("dialogue_number").get<int>();
                auto grab = [&](const char* key, std::string& dst) {
                    if (jf.contains(key) && jf.at(key).is_string())
                        dst = jf.at(key).get<std::string>();
                };
                grab("context", f.context);
                grab("dialogue_content", f.dialogue_content);
                grab("learning", f.learning);
            } else {
                report.add("$.dialogue_features[" + std::to_string(i) + "]", "wrong_type");
            }
            seed.dialogue_features.push_back(std::move(f));
            ++i;
        }
    }
    return seed;
}

Json to_json(const CaseSeed& seed) {
    Json j;
    j["case_id"] = seed.case_id;
    j["therapy"] = to_string(seed.therapy);
    j["client_info"] = to_json(seed.client_info);
    j["global_plan"] = to_json(seed.global_plan);
    Json features = Json::array();
    for (const auto& f : seed.dialogue_features) features.push_back(to_json(f));
    j["dialogue_features"] = std::move(features);
    return j;
}

// ---------------------------------------------------------------------------
// Skill selection
// ---------------------------------------------------------------------------

SkillCandidateSet fine_select(const SkillLibrary& lib, const std::vector<MetaSkill>& coarse,
                              const SessionGoals& goals, const Gateway& gateway, int k,
                              bool fallback_enabled) {
    if (coarse.empty()) throw CfError(errkind::empty_coarse_set, "coarse filter returned nothing");

    Json library = Json::array();
    for (const auto& m : coarse) {
        Json jm;
        jm["meta_skill"] = m.skill_name + ":" + m.skill_description;
        Json atomics = Json::array();
        for (const AtomicSkill* a : lib.atomics_under(m)) atomics.push_back(to_json(*a));
        jm["atomic_skills"] = std::move(atomics);
        library.push_back(std::move(jm));
    }

    ChatRequest req;
    req.template_id = "skill_suggestion";
    req.variables["session_goals"] = to_json(goals);
    req.variables["skill_library"] = library;
    req.variables["k"] = k;

    try {
        ChatResponse resp = gateway.complete(
            req, [&](const std::string& raw, Json& parsed) -> std::optional<std::string> {
                Json payload;
                try {
                    payload = extract_json_payload(raw);
                } catch (const CfError& e) {
                    return std::string(e.what());
                }
                ValidationReport report;
                SkillCandidateSet set = parse_candidate_set(payload, report);
                if (!report.ok()) return "schema_violation: " + report.summary();
                report = verify_candidate_set(set, lib, k);
                if (!report.ok()) return "skill_integrity: " + report.summary();
                if (set.empty()) return std::string("skill_integrity: empty candidate set");
                parsed = payload;
                return std::nullopt;
            });
        ValidationReport report;
        return parse_candidate_set(resp.parsed, report);
    } catch (const CfError& e) {
        if (!fallback_enabled || e.kind() != errkind::retries_exhausted) throw;
        return fallback_select(lib, coarse, goals.objective, k);
    }
}

// ---------------------------------------------------------------------------
// Firewall
// ---------------------------------------------------------------------------

namespace {

void collect_string_leaves(const Json& j, std::vector<std::string>& out) {
    if (j.is_string()) {
        if (!j.get<std::string>().empty()) out.push_back(j.get<std::string>());
    } else if (j.is_object()) {
        for (const auto& [_, v] : j.items()) collect_string_leaves(v, out);
    } else if (j.is_array()) {
        for (const auto& v : j) collect_string_leaves(v, out);
    }
}

bool contains_subtree(const Json& haystack, const Json& needle) {
    if (haystack == needle) return true;
    if (haystack.is_object()) {
        for (const auto& [_, v] : haystack.items())
            if (contains_subtree(v, needle)) return true;
    } else if (haystack.is_array()) {
        for (const auto& v : haystack)
            if (contains_subtree(v, needle)) return true;
    }
    return false;
}

}  // namespace

void check_request_firewall(const std::map<std::string, Json>& variables,
                            const ClientProfile& ground_truth, const ClientProfile& unlocked) {
    const Json gt_json = to_json(ground_truth);
    auto client_var = variables.find("client_info");
    if (client_var == variables.end() || client_var->second != gt_json)
        throw CfError(errkind::firewall_violation,
                      "ground truth must sit exactly under the client_info variable");

    // Ground-truth-only leaves: values the counselor has not unlocked yet.
    std::vector<std::string> unlocked_leaves;
    collect_string_leaves(to_json(unlocked), unlocked_leaves);
    std::vector<std::string> gt_leaves;
    collect_string_leaves(gt_json, gt_leaves);
    std::vector<std::string> gt_only;
    for (const auto& leaf : gt_leaves) {
        if (std::find(unlocked_leaves.begin(), unlocked_leaves.end(), leaf) ==
            unlocked_leaves.end())
            gt_only.push_back(leaf);
    }

    for (const auto& [name, value] : variables) {
        if (name == "client_info") continue;
        if (contains_subtree(value, gt_json))
            throw CfError(errkind::firewall_violation,
                          "ground-truth profile object embedded in variable " + name);
        std::vector<std::string> leaves;
        collect_string_leaves(value, leaves);
        for (const auto& leaf : leaves) {
            if (std::find(gt_only.begin(), gt_only.end(), leaf) != gt_only.end())
                throw CfError(errkind::firewall_violation,
                              "ground-truth-only value in variable " + name + ": " + leaf);
        }
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

SessionEngine::SessionEngine(const SkillLibrary& lib, std::shared_ptr<Gateway> gateway,
                             EngineConfig config)
    : lib_(lib), gateway_(std::move(gateway)), config_(std::move(config)) {}

SessionGoals SessionEngine::build_session_goals(const SessionPlanContent& entry,
                                                const CounselorView& view,
                                                int session_number) const {
    ChatRequest req;
    req.template_id = "session_objective";
    Json history;
    Json summaries = Json::array();
    for (size_t i = 0; i < view.history_summaries.size(); ++i) {
        Json e;
        e["session_number"] = static_cast<int>(i) + 1;
        e["summary"] = to_json(view.history_summaries[i]);
        summaries.push_back(std::move(e));
    }
    history["session_summaries"] = std::move(summaries);
    history["last_summary"] = view.history_summaries.empty()
                                  ? Json()
                                  : to_json(view.history_summaries.back());
    req.variables["history_summary"] = std::move(history);
    req.variables["client_info_last"] = to_json(view.unlocked_client_info);
    Json plan_entry;
    Json theories = Json::array();
    for (Therapy t : entry.theory_select) theories.push_back(to_string(t));
    plan_entry["theory_select"] = std::move(theories);
    plan_entry["theme"] = entry.theme;
    plan_entry["persona_links"] = entry.persona_links;
    plan_entry["case_material"] = entry.case_material;
    plan_entry["rationale"] = entry.rationale;
    req.variables["plan_for_this_session"] = std::move(plan_entry);
    req.variables["session_num"] = session_number;

    ChatResponse resp = gateway_->complete(
        req, [&](const std::string& raw, Json& parsed) -> std::optional<std::string> {
            Json payload;
            try {
                payload = extract_json_payload(raw);
            } catch (const CfError& e) {
                return std::string(e.what());
            }
            ValidationReport report;
            SessionGoals goals = parse_session_goals(payload, report);
            if (!report.ok()) return "schema_violation: " + report.summary();
            if (goals.stage_title != entry.theme)
                return "theme_mismatch: stage_title must copy the plan theme byte-identically";
            if (goals.objective.empty()) return std::string("empty_objectives");
            if (session_number == 1) {
                bool intake = false;
                for (const auto& o : goals.objective)
                    for (const auto& kw : config_.intake_keywords)
                        if (o.find(kw) != std::string::npos) intake = true;
                if (!intake)
                    return std::string(
                        "missing_intake_objective: session 1 must explore basic information");
            }
            parsed = payload;
            return std::nullopt;
        });

    ValidationReport report;
    SessionGoals goals = parse_session_goals(resp.parsed, report);
    if (goals.overall_stage.empty()) {
        // stage name comes from the plan, not the provider
        goals.overall_stage = "";
    }
    return goals;
}

SessionTranscript SessionEngine::generate_dialogue(const CounselorView& view,
                                                   const ClientProfile& ground_truth,
                                                   const std::vector<DialogueFeature>& features,
                                                   const std::vector<Utterance>& history_tail,
                                                   const std::vector<Therapy>& theory_select,
                                                   int session_number, int stage) const {
    if (view.suggested_skills.empty())
        throw CfError(errkind::empty_coarse_set, "candidate skill set is empty");

    ChatRequest req;
    req.template_id = "dialogue_generation_stage" + std::to_string(std::clamp(stage, 1, 3));
    Json theories = Json::array();
    for (Therapy t : theory_select) theories.push_back(to_string(t));
    req.variables["theory_select"] = std::move(theories);
    req.variables["client_info"] = to_json(ground_truth);
    req.variables["unlocked_client_info"] = to_json(view.unlocked_client_info);
    req.variables["session_goals"] = to_json(view.goals);
    Json groups = Json::array();
    for (const auto& g : view.suggested_skills.groups) {
        Json jg;
        jg["meta_skill"] = g.meta_skill;
        Json atomics = Json::array();
        for (const auto& a : g.atomic_skills) atomics.push_back(to_json(a));
        jg["atomic_skills"] = std::move(atomics);
        groups.push_back(std::move(jg));
    }
    req.variables["suggest_skills"] = std::move(groups);
    Json history = Json::array();
    for (const auto& s : view.history_summaries) history.push_back(to_json(s));
    req.variables["history_summary"] = std::move(history);
    req.variables["dialogue_history"] = dialogue_to_json(history_tail);
    Json jfeatures = Json::array();
    for (const auto& f : features) jfeatures.push_back(to_json(f));
    req.variables["dialogue_features"] = std::move(jfeatures);
    req.variables["session_number"] = session_number;
    req.temperature = TemperatureClass::creative;

    check_request_firewall(req.variables, ground_truth, view.unlocked_client_info);

    auto build_transcript = [&](const Json& payload) {
        SessionTranscript t;
        t.session_number = session_number;
        t.theory_select = theory_select;
        t.goals = view.goals;
        t.suggested_skills = view.suggested_skills;
        ValidationReport report;
        if (payload.is_object() && payload.contains("dialogue"))
            t.utterances = parse_dialogue(payload.at("dialogue"), report, "$.dialogue");
        else
            report.add("$.dialogue", "missing_key");
        return std::make_pair(std::move(t), std::move(report));
    };

    ChatResponse resp = gateway_->complete(
        req, [&](const std::string& raw, Json& parsed) -> std::optional<std::string> {
            Json payload;
            try {
                payload = extract_json_payload(raw);
            } catch (const CfError& e) {
                return std::string(e.what());
            }
            auto [t, report] = build_transcript(payload);
            if (!report.ok()) return "schema_violation: " + report.summary();
            ValidationReport structural = validate_transcript(t, config_.bounds);
            std::string hard_errors;
            for (const auto& v : structural.violations)
                if (is_hard_violation(v))
                    hard_errors += v.path + ": " + v.rule + " (" + v.detail + "); ";
            if (!hard_errors.empty()) return "transcript_invalid: " + hard_errors;
            // skill-citation closure
            for (size_t i = 0; i < t.utterances.size(); ++i) {
                const auto& u = t.utterances[i];
                if (u.role != Role::counselor || !u.think) continue;
                for (const auto& ref : u.think->skill_refs) {
                    auto resolved = resolve_skill_ref(view.suggested_skills, ref);
                    if (std::holds_alternative<SkillRefError>(resolved)) {
                        const auto& err = std::get<SkillRefError>(resolved);
                        return "skill_citation: utterance " + std::to_string(i) +
                               (err.kind == SkillRefErrorKind::unknown_id
                                    ? " cites unknown skill id " + std::to_string(ref.skill_id)
                                    : " description drift on skill id " +
                                          std::to_string(ref.skill_id));
                    }
                }
            }
            parsed = payload;
            return std::nullopt;
        });

    auto [transcript, report] = build_transcript(resp.parsed);
    return transcript;
}

CounselorView SessionEngine::build_view(const std::vector<SessionOutcome>& prior) const {
    CounselorView view;
    view.unlocked_client_info =
        prior.empty() ? ClientProfile::empty_structured() : prior.back().merged;
    for (const auto& o : prior) view.history_summaries.push_back(o.summary);
    return view;
}

SessionOutcome SessionEngine::run_session(const CaseSeed& seed,
                                          const std::vector<SessionOutcome>& prior,
                                          int session_number) const {
    const int total = seed.global_plan.total_sessions();
    if (session_number < 1 || session_number > total)
        throw CfError(errkind::plan_exhausted,
                      "session " + std::to_string(session_number) + " beyond plan T=" +
                          std::to_string(total));
    if (static_cast<int>(prior.size()) != session_number - 1)
        throw CfError(errkind::plan_exhausted,
                      "sessions 1.." + std::to_string(session_number - 1) +
                          " must be complete first");
    const SessionPlanContent* entry = seed.global_plan.entry(session_number);
    if (!entry)
        throw CfError(errkind::plan_exhausted,
                      "plan has no entry for session " + std::to_string(session_number));
    const int stage = seed.global_plan.stage_of_session(session_number);

    CounselorView view = build_view(prior);

    // Phase 1, pre-session preparation: coarse-to-fine skill retrieval over
    // plan-derived goals, then the concrete session agenda.
    auto coarse = coarse_filter(lib_, entry->theory_select, stage);
    SessionGoals plan_goals;
    plan_goals.overall_stage = seed.global_plan.stages[static_cast<size_t>(stage - 1)].stage_name;
    plan_goals.stage_title = entry->theme;
    plan_goals.objective = entry->case_material;
    view.suggested_skills =
        fine_select(lib_, coarse, plan_goals, *gateway_, config_.k_skills,
                    config_.fine_select_fallback);
    view.goals = build_session_goals(*entry, view, session_number);
    view.goals.overall_stage = plan_goals.overall_stage;

    // Phase 2, in-session execution.
    std::vector<Utterance> tail;
    if (!prior.empty()) {
        const auto& last = prior.back().transcript.utterances;
        const size_t n = std::min(last.size(), static_cast<size_t>(config_.history_tail_utterances));
        tail.assign(last.end() - static_cast<long>(n), last.end());
    }
    SessionOutcome outcome;
    outcome.session_number = session_number;
    outcome.transcript = generate_dialogue(view, seed.client_info, seed.dialogue_features, tail,
                                           entry->theory_select, session_number, stage);
    outcome.validation = validate_transcript(outcome.transcript, config_.bounds);

    // Phase 3, post-session consolidation.
    std::vector<std::string> prior_homework;
    for (const auto& o : prior)
        for (const auto& hw : o.summary.homework) prior_homework.push_back(hw);
    ExtractionDelta delta =
        extract_session_info(outcome.transcript, entry->theory_select, session_number, *gateway_,
                             prior_homework, config_.memory);
    outcome.extracted = delta.client_info_get;
    MergeResult merge = merge_profiles(view.unlocked_client_info, delta, seed.client_info,
                                       entry->theory_select, *gateway_, config_.memory);
    outcome.merged = std::move(merge.merged);
    outcome.merge_decisions = std::move(merge.decisions);
    outcome.summary =
        summarize_session(outcome.transcript, view.unlocked_client_info, view.history_summaries,
                          view.goals, seed.global_plan, entry->theory_select, *gateway_,
                          config_.memory);
    return outcome;
}

CaseRecord SessionEngine::run_case(const CaseSeed& seed, CaseStore* store) const {
    ValidationReport seed_report;
    parse_case_seed(to_json(seed), seed_report);
    if (!seed_report.ok())
        throw CfError(errkind::schema_violation, "invalid case seed: " + seed_report.summary());

    const int total = seed.global_plan.total_sessions();
    std::vector<SessionOutcome> outcomes;
    for (int n = 1; n <= total; ++n) {
        try {
            outcomes.push_back(run_session(seed, outcomes, n));
        } catch (const CfError& e) {
            throw CfError(e.kind(), "session " + std::to_string(n) + ": " + e.what());
        }
        if (store) store->persist_session(seed.case_id, outcomes.back(), total);
    }

    CaseRecord record;
    record.case_id = seed.case_id;
    record.therapy = seed.therapy;
    record.client_info = seed.client_info;
    record.global_plan = seed.global_plan;
    record.dialogue_features = seed.dialogue_features;
    for (const auto& o : outcomes) {
        SessionEntry entry;
        entry.transcript = o.transcript;
        entry.summary = o.summary;
        entry.unlocked_after = o.merged;
        record.sessions.push_back(std::move(entry));
    }

    CaseParseResult check = parse_case_record(to_json(record));
    if (!check.ok())
        throw CfError(errkind::schema_violation,
                      "generated case fails validation: " + check.report.summary());
    if (store) store->persist_case(record);
    return record;
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

CaseStore::CaseStore(std::string root_dir) : root_(std::move(root_dir)) {
    fs::create_directories(root_);
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CfError(errkind::io_error, "cannot write " + path.string());
    out << content;
}

}  // namespace

void CaseStore::persist_session(const std::string& case_id, const SessionOutcome& outcome,
                                int plan_total) {
    const fs::path case_dir = fs::path(root_) / case_id;
    fs::create_directories(case_dir);
    const std::string session_name = "session_" + std::to_string(outcome.session_number);
    const fs::path staging = case_dir / (".staging_" + session_name);
    fs::remove_all(staging);
    fs::create_directories(staging);

    write_file(staging / "transcript.json", pretty_json(to_json(outcome.transcript)));
    write_file(staging / "extracted.json", pretty_json(to_json(outcome.extracted)));
    write_file(staging / "merged.json", pretty_json(to_json(outcome.merged)));
    write_file(staging / "summary.json", pretty_json(to_json(outcome.summary)));
    write_file(staging / "validation.json", pretty_json(outcome.validation.to_json()));
    std::string decisions;
    for (const auto& d : outcome.merge_decisions) decisions += canonical_json(to_json(d)) + "\n";
    write_file(staging / "merge_decisions.jsonl", decisions);

    const fs::path final_dir = case_dir / session_name;
    fs::remove_all(final_dir);
    fs::rename(staging, final_dir);

    Json manifest;
    manifest["case_id"] = case_id;
    manifest["completed_sessions"] = outcome.session_number;
    manifest["plan_T"] = plan_total;
    const fs::path tmp_manifest = case_dir / ".manifest.json.tmp";
    write_file(tmp_manifest, pretty_json(manifest));
    fs::rename(tmp_manifest, case_dir / "manifest.json");
}

void CaseStore::persist_case(const CaseRecord& record) {
    const fs::path case_dir = fs::path(root_) / record.case_id;
    fs::create_directories(case_dir);
    const fs::path tmp = case_dir / ".case.json.tmp";
    write_file(tmp, pretty_json(to_json(record)));
    fs::rename(tmp, case_dir / "case.json");
}

Json CaseStore::read_manifest(const std::string& case_id) const {
    const fs::path path = fs::path(root_) / case_id / "manifest.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CfError(errkind::io_error, "no manifest for " + case_id);
    return Json::parse(in);
}

}  // namespace counselforge
