#include <doctest.h>

#include "counselforge/memory_ledger.hpp"
#include "counselforge/text.hpp"

#include "support/fixtures.hpp"

#include <algorithm>
#include <set>

using namespace counselforge;

namespace {

MemoryConfig test_config() { return cftest::load_repo_memory_config(); }

ExtractionDelta delta_with_growth(std::vector<std::string> items) {
    ExtractionDelta d;
    d.client_info_get.basic_info.growth_experiences = std::move(items);
    return d;
}

// Scripted merge provider returning a fixed profile.
Gateway merge_gateway(const ClientProfile& provider_output) {
    TemplateRegistry r;
    r.add("client_merge", "h={{history_profile}} c={{current_profile}} g={{global_profile}} t={{theory_select}}");
    Json payload;
    payload["client_info_merge"] = to_json(provider_output);
    const std::string raw = canonical_json(payload);
    return Gateway(r, std::make_shared<ScriptedProvider>(
                          "merge-mock", [raw](const RenderedRequest&) { return raw; }));
}

}  // namespace

TEST_CASE("reality-therapy firewall strips homework-derived items, keeps life history") {
    ExtractionDelta delta =
        delta_with_growth({"给父亲写了信", "小学时经常被父亲关在门外罚站"});
    const std::vector<std::string> prior_homework = {"给父亲写一封信"};
    ValidationReport audit;
    ExtractionDelta filtered = apply_extraction_firewalls(delta, {Therapy::cbt}, 2,
                                                          prior_homework, test_config(), &audit);
    REQUIRE(filtered.client_info_get.basic_info.growth_experiences.size() == 1);
    CHECK(filtered.client_info_get.basic_info.growth_experiences[0] ==
          "小学时经常被父亲关在门外罚站");
    bool flagged = false;
    for (const auto& v : audit.violations)
        if (v.rule == "reality_therapy_firewall") flagged = true;
    CHECK(flagged);
}

TEST_CASE("fact-expectation firewall strips future-tense items") {
    ExtractionDelta delta = delta_with_growth(
        {"打算下学期申请交换项目", "初中曾被同学长期孤立"});
    ValidationReport audit;
    ExtractionDelta filtered =
        apply_extraction_firewalls(delta, {Therapy::cbt}, 2, {}, test_config(), &audit);
    REQUIRE(filtered.client_info_get.basic_info.growth_experiences.size() == 1);
    CHECK(filtered.client_info_get.basic_info.growth_experiences[0] == "初中曾被同学长期孤立");
}

TEST_CASE("post-therapy state reported as background is kept out of medical_history") {
    ExtractionDelta delta;
    delta.client_info_get.basic_info.static_traits.medical_history =
        "在上周治疗之后，我的情绪变得稳定了";
    // the phrasing matches homework recorded by the previous summary
    const std::vector<std::string> prior = {"观察治疗之后的情绪变化，我的情绪变得稳定了再记录"};
    ExtractionDelta filtered =
        apply_extraction_firewalls(delta, {Therapy::cbt}, 2, prior, test_config());
    CHECK(filtered.client_info_get.basic_info.static_traits.medical_history.empty());
}

TEST_CASE("session-1-only fields are zeroed on later sessions") {
    ExtractionDelta delta;
    delta.client_info_get.basic_info.main_problem = "问题";
    delta.client_info_get.basic_info.core_demands = "诉求";
    delta.client_info_get.basic_info.topic = "家庭关系";
    ValidationReport audit;
    ExtractionDelta filtered =
        apply_extraction_firewalls(delta, {Therapy::cbt}, 3, {}, test_config(), &audit);
    CHECK(filtered.client_info_get.basic_info.main_problem.empty());
    CHECK(filtered.client_info_get.basic_info.core_demands.empty());
    CHECK(filtered.client_info_get.basic_info.topic.empty());
    // and untouched on session 1
    ExtractionDelta delta1;
    delta1.client_info_get.basic_info.topic = "家庭关系";
    CHECK(apply_extraction_firewalls(delta1, {Therapy::cbt}, 1, {}, test_config())
              .client_info_get.basic_info.topic == "家庭关系");
}

TEST_CASE("therapy blocks outside theory_select are zeroed in the delta") {
    ExtractionDelta delta;
    delta.client_info_get.cbt.core_beliefs = {"信念"};
    delta.client_info_get.bt.target_behavior.push_back({"行为", "原因", "功能", "后果", {}});
    ExtractionDelta filtered =
        apply_extraction_firewalls(delta, {Therapy::cbt}, 2, {}, test_config());
    CHECK_FALSE(filtered.client_info_get.cbt.core_beliefs.empty());
    CHECK(filtered.client_info_get.bt.target_behavior.empty());
}

TEST_CASE("name propagation keeps the client's own variant when it matches the global name") {
    CHECK(name_matches_global("小马", "马某"));
    CHECK(name_matches_global("老马", "马某"));
    CHECK(name_matches_global("马先生", "马某"));
    CHECK(name_matches_global("马某", "马某"));
    CHECK_FALSE(name_matches_global("王五", "马某"));
    CHECK_FALSE(name_matches_global("", "马某"));

    ClientProfile history = ClientProfile::empty_structured();
    ClientProfile global = ClientProfile::empty_structured();
    global.basic_info.static_traits.name = "马某";
    ExtractionDelta current;
    current.client_info_get.basic_info.static_traits.name = "小马";
    ClientProfile provider = history;
    provider.basic_info.static_traits.name = "小马";
    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::cbt}, test_config());
    CHECK(result.merged.basic_info.static_traits.name == "小马");

    // a non-matching variant falls back to history
    ExtractionDelta other;
    other.client_info_get.basic_info.static_traits.name = "王五";
    ClientProfile provider2 = history;
    provider2.basic_info.static_traits.name = "王五";
    MergeResult result2 =
        enforce_merge_rules(provider2, history, other, global, {Therapy::cbt}, test_config());
    CHECK(result2.merged.basic_info.static_traits.name.empty());
}

TEST_CASE("therapy gating: non-selected blocks stay byte-equal to history") {
    ClientProfile history = cftest::fixture_profile();
    ClientProfile global = cftest::fixture_profile();
    ClientProfile provider = history;
    provider.bt.target_behavior[0].behavior = "被篡改的行为";
    provider.het.contact_model.clear();
    ExtractionDelta empty_delta;
    MergeResult result =
        enforce_merge_rules(provider, history, empty_delta, global, {Therapy::cbt}, test_config());
    CHECK(result.merged.bt == history.bt);
    CHECK(result.merged.het == history.het);
}

TEST_CASE("precedence: history keeps main_problem, core_demands and topic once known") {
    ClientProfile history = ClientProfile::empty_structured();
    history.basic_info.main_problem = "历史主诉";
    history.basic_info.topic = "学业压力";
    ClientProfile global = cftest::fixture_profile();
    ExtractionDelta current;
    current.client_info_get.basic_info.main_problem = "另一个主诉";
    current.client_info_get.basic_info.core_demands = "新的诉求";
    ClientProfile provider = history;
    provider.basic_info.main_problem = "另一个主诉";
    provider.basic_info.core_demands = "新的诉求";
    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::cbt}, test_config());
    CHECK(result.merged.basic_info.main_problem == "历史主诉");
    CHECK(result.merged.basic_info.topic == "学业压力");
    CHECK(result.merged.basic_info.core_demands == "新的诉求");  // history had none
}

TEST_CASE("no-leakage: content present only in the ground truth is reverted and logged") {
    ClientProfile history = ClientProfile::empty_structured();
    history.basic_info.growth_experiences = {"已经披露的一段经历"};
    ClientProfile global = cftest::fixture_profile();
    global.basic_info.growth_experiences.push_back("SENTINEL-只在全局真值中出现的隐秘事件");
    ExtractionDelta current = delta_with_growth({"本次新披露的童年事件，与学校有关"});

    ClientProfile provider = history;
    provider.basic_info.growth_experiences.push_back("本次新披露的童年事件，与学校有关");
    provider.basic_info.growth_experiences.push_back("SENTINEL-只在全局真值中出现的隐秘事件");
    provider.basic_info.static_traits.occupation =
        global.basic_info.static_traits.occupation;  // leaked scalar

    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::cbt}, test_config());
    const std::string merged_json = canonical_json(to_json(result.merged));
    CHECK(merged_json.find("SENTINEL") == std::string::npos);
    CHECK(result.merged.basic_info.static_traits.occupation.empty());
    CHECK(result.merged.basic_info.growth_experiences.size() == 2);
    int drops = 0;
    for (const auto& d : result.decisions)
        if (d.action == MergeAction::drop_conflict) ++drops;
    CHECK(drops == 2);
}

TEST_CASE("caps: force-field lists truncate to N+2 against the deduplicated union") {
    ClientProfile global = ClientProfile::empty_structured();
    global.pmt.force_field.positive_force = {"力量甲", "力量乙", "力量丙"};  // N=3 -> cap 5
    ClientProfile history = ClientProfile::empty_structured();
    history.pmt.force_field.positive_force = {"力量甲", "力量乙", "力量丙", "后来发现的力量丁"};
    ExtractionDelta current;
    current.client_info_get.pmt.force_field.positive_force = {"新增力量戊", "新增力量己",
                                                              "新增力量庚"};
    ClientProfile provider = history;
    for (const auto& f : current.client_info_get.pmt.force_field.positive_force)
        provider.pmt.force_field.positive_force.push_back(f);
    REQUIRE(provider.pmt.force_field.positive_force.size() == 7);

    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::pmt}, test_config());

    // oracle: dedup the union, apply N+2
    std::vector<std::string> expected_union;
    for (const auto& v : provider.pmt.force_field.positive_force) {
        bool dup = false;
        for (const auto& e : expected_union)
            if (text::semantically_same(e, v)) dup = true;
        if (!dup) expected_union.push_back(v);
    }
    const size_t cap = global.pmt.force_field.positive_force.size() + 2;
    const size_t expected = std::min(expected_union.size(), cap);
    CHECK(result.merged.pmt.force_field.positive_force.size() == expected);
    int truncations = 0;
    for (const auto& d : result.decisions)
        if (d.action == MergeAction::truncate) ++truncations;
    CHECK(truncations == static_cast<int>(7 - expected));
}

TEST_CASE("caps hold on pdt lists regardless of provider behavior") {
    ClientProfile history = cftest::fixture_profile();
    ClientProfile global = cftest::fixture_profile();
    ClientProfile provider = history;
    for (int i = 0; i < 6; ++i) {
        provider.pdt.core_conflict.defense_goal.push_back("多余目标" + std::to_string(i));
        provider.pdt.object_relations.push_back(
            {"自体" + std::to_string(i), "客体" + std::to_string(i), "情感" + std::to_string(i)});
        provider.pdt.behavioral_response_patterns.push_back(
            {"触发" + std::to_string(i), "解释", "回避",
             "远离可能引发痛苦情绪的情境、话题或关系。", "指令"});
    }
    ExtractionDelta current;  // adversarial output unrelated to any delta
    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::pdt}, test_config());
    CHECK(result.merged.pdt.core_conflict.defense_goal.size() <= 3);
    CHECK(result.merged.pdt.object_relations.size() <= 4);
    CHECK(result.merged.pdt.behavioral_response_patterns.size() <= 5);
}

TEST_CASE("het caps: manifestations and outcomes never exceed five") {
    ClientProfile history = cftest::fixture_profile();
    ClientProfile global = cftest::fixture_profile();
    ClientProfile provider = history;
    for (int i = 0; i < 8; ++i) {
        provider.het.existentialism_topic[0].manifestations.push_back("表现" + std::to_string(i));
        provider.het.existentialism_topic[0].outcomes.push_back("结果" + std::to_string(i));
        provider.het.contact_model[0].manifestations.push_back("接触表现" + std::to_string(i));
    }
    MergeResult result = enforce_merge_rules(provider, history, {}, global, {Therapy::het},
                                             test_config());
    for (const auto& topic : result.merged.het.existentialism_topic) {
        CHECK(topic.manifestations.size() <= 5);
        CHECK(topic.outcomes.size() <= 5);
    }
    for (const auto& mode : result.merged.het.contact_model)
        CHECK(mode.manifestations.size() <= 5);
}

TEST_CASE("bt antecedent lists cap at global N+2 per matched behavior") {
    ClientProfile history = cftest::fixture_profile();
    ClientProfile global = cftest::fixture_profile();  // antecedent N=2 -> cap 4
    ClientProfile provider = history;
    for (int i = 0; i < 6; ++i)
        provider.bt.target_behavior[0].antecedent.push_back("情境" + std::to_string(i));
    MergeResult result =
        enforce_merge_rules(provider, history, {}, global, {Therapy::bt}, test_config());
    CHECK(result.merged.bt.target_behavior[0].antecedent.size() <= 4);
}

TEST_CASE("idempotence: merging an empty delta returns history byte-identical") {
    ClientProfile history = cftest::fixture_profile();
    history.basic_info.static_traits.name = "林晓";
    ClientProfile global = cftest::fixture_profile();
    ExtractionDelta empty_delta;
    MergeResult result = enforce_merge_rules(history, history, empty_delta, global,
                                             {Therapy::cbt, Therapy::pdt}, test_config());
    CHECK(canonical_json(to_json(result.merged)) == canonical_json(to_json(history)));
    CHECK(result.decisions.empty());
}

TEST_CASE("monotone knowledge: vanished history items always carry a decision") {
    ClientProfile history = ClientProfile::empty_structured();
    history.basic_info.growth_experiences = {"第一段重要经历", "第二段重要经历",
                                             "第三段重要经历"};
    ClientProfile global = history;
    ClientProfile provider = history;
    provider.basic_info.growth_experiences = {"第一段重要经历"};  // provider dropped two
    MergeResult result =
        enforce_merge_rules(provider, history, {}, global, {Therapy::cbt}, test_config());
    // the engine restores them: nothing vanished, no decisions required
    CHECK(result.merged.basic_info.growth_experiences.size() == 3);

    // with a cap in play, the overflow is logged as truncate
    ClientProfile capped_history = ClientProfile::empty_structured();
    for (int i = 0; i < 3; ++i)
        capped_history.pdt.core_conflict.defense_goal.push_back("完全不同方向的防御目标编号" +
                                                                std::to_string(i * 7 + 11));
    ClientProfile capped_provider = capped_history;
    capped_provider.pdt.core_conflict.defense_goal = {"来自本次对话的全新防御路线甲",
                                                      "来自本次对话的全新防御路线乙"};
    ExtractionDelta capped_current;
    capped_current.client_info_get.pdt.core_conflict.defense_goal = {
        "来自本次对话的全新防御路线甲", "来自本次对话的全新防御路线乙"};
    MergeResult capped = enforce_merge_rules(capped_provider, capped_history, capped_current,
                                             capped_history, {Therapy::pdt}, test_config());
    CHECK(capped.merged.pdt.core_conflict.defense_goal.size() == 3);
    // every history item missing from the merge is covered by a truncate record
    for (const auto& h : capped_history.pdt.core_conflict.defense_goal) {
        bool present = false;
        for (const auto& m : capped.merged.pdt.core_conflict.defense_goal)
            if (text::semantically_same(h, m)) present = true;
        if (present) continue;
        bool logged = false;
        for (const auto& d : capped.decisions) {
            if (d.action != MergeAction::truncate && d.action != MergeAction::drop_conflict)
                continue;
            if (d.rationale_tag.find(h) != std::string::npos) logged = true;
        }
        CHECK_MESSAGE(logged, "unlogged vanish: ", h);
    }
}

TEST_CASE("decisions: one record per changed leaf, labelled by origin") {
    ClientProfile history = ClientProfile::empty_structured();
    history.basic_info.static_traits.age = "24";
    ClientProfile global = cftest::fixture_profile();
    ExtractionDelta current;
    current.client_info_get.basic_info.static_traits.occupation = "硕士研究生";
    current.client_info_get.basic_info.growth_experiences = {"新披露的一段校园经历"};
    ClientProfile provider = history;
    provider.basic_info.static_traits.occupation = "硕士研究生";
    provider.basic_info.growth_experiences = {"新披露的一段校园经历"};
    MergeResult result =
        enforce_merge_rules(provider, history, current, global, {Therapy::cbt}, test_config());
    REQUIRE(result.decisions.size() == 2);
    std::set<std::string> paths;
    for (const auto& d : result.decisions) {
        CHECK(d.action == MergeAction::take_current);
        CHECK(paths.insert(d.path).second);  // unique per changed leaf
    }
}

TEST_CASE("progress comparator prefers resolved over pending, unknown ranks lowest") {
    CHECK(progress_priority("已解决") > progress_priority("待解决"));
    CHECK(progress_priority("待解决") > progress_priority("未提及"));
    CHECK(progress_priority("未提及") > progress_priority("自定义标签"));

    ClientProfile history = cftest::fixture_profile();
    history.cbt.special_situations[0].progress = "已解决";
    ClientProfile provider = history;
    provider.cbt.special_situations[0].progress = "待解决";  // regression attempt
    MergeResult result = enforce_merge_rules(provider, history, {}, cftest::fixture_profile(),
                                             {Therapy::cbt}, test_config());
    CHECK(*result.merged.cbt.special_situations[0].progress == "已解决");
}

TEST_CASE("defense definitions come from the bundled table on changed items") {
    MemoryConfig cfg = test_config();
    REQUIRE(cfg.defense_definitions.count("理智化") == 1);
    ClientProfile history = cftest::fixture_profile();
    ClientProfile provider = history;
    provider.pdt.behavioral_response_patterns.push_back(
        {"新的触发情境，例如临近答辩", "解释", "否认", "口语化的随便解释", "指令"});
    ExtractionDelta current;
    current.client_info_get.pdt.behavioral_response_patterns.push_back(
        {"新的触发情境，例如临近答辩", "解释", "否认", "口语化的随便解释", "指令"});
    MergeResult result = enforce_merge_rules(provider, history, current, cftest::fixture_profile(),
                                             {Therapy::pdt}, test_config());
    REQUIRE(result.merged.pdt.behavioral_response_patterns.size() == 3);
    CHECK(result.merged.pdt.behavioral_response_patterns[2].defense_definition ==
          cfg.defense_definitions.at("否认"));
}

TEST_CASE("merge_profiles end to end applies the provider then the deterministic layer") {
    ClientProfile history = ClientProfile::empty_structured();
    ClientProfile global = cftest::fixture_profile();
    ExtractionDelta current;
    current.client_info_get.basic_info.static_traits.name = "林晓";
    ClientProfile provider_output = ClientProfile::empty_structured();
    provider_output.basic_info.static_traits.name = "林晓";
    provider_output.basic_info.static_traits.gender =
        global.basic_info.static_traits.gender;  // leak
    Gateway gateway = merge_gateway(provider_output);
    MergeResult result =
        merge_profiles(history, current, global, {Therapy::cbt}, gateway, test_config());
    CHECK(result.merged.basic_info.static_traits.name == "林晓");
    CHECK(result.merged.basic_info.static_traits.gender.empty());
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

namespace {

SessionTranscript closing_transcript() {
    SessionTranscript t;
    t.session_number = 2;
    t.theory_select = {Therapy::cbt};
    auto counselor = [](const std::string& spoken) {
        ThinkTrace trace;
        trace.assessment = "推进";
        trace.client_state = "平稳";
        trace.skill_refs = {{1, "技能"}};
        trace.strategy = "收尾";
        Utterance u;
        u.role = Role::counselor;
        u.text = render_think_trace(trace) + spoken;
        u.think = trace;
        u.spoken_text = spoken;
        return u;
    };
    auto client = [](const std::string& text) {
        Utterance u;
        u.role = Role::client;
        u.text = text;
        u.spoken_text = text;
        return u;
    };
    t.utterances.push_back(counselor("上次写日记的作业完成得怎么样？"));
    t.utterances.push_back(client("写日记感觉还不错，记录了每天的心情。"));
    t.utterances.push_back(counselor(
        "很好。现在布置这周的作业：记录两次情绪波动的ABC情境，包括场景、想法与身体反应。今天就到这里。"));
    return t;
}

}  // namespace

TEST_CASE("homework provenance: only the closing assignment is traceable") {
    const SessionTranscript t = closing_transcript();
    SessionSummary ok;
    ok.homework = {"记录两次情绪波动的ABC情境"};
    CHECK(check_homework_provenance(ok, t, test_config()).ok());

    SessionSummary historical;
    historical.homework = {"记录两次情绪波动的ABC情境", "写日记"};
    const auto report = check_homework_provenance(historical, t, test_config());
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].rule == "homework_provenance");
    CHECK(report.violations[0].path == "$.homework[1]");
}

TEST_CASE("homework window is the final contiguous counselor segment") {
    SessionTranscript t = closing_transcript();
    const std::string window = homework_window_text(t, test_config());
    CHECK(window.find("ABC情境") != std::string::npos);
    CHECK(window.find("写日记的作业完成得怎么样") == std::string::npos);

    MemoryConfig wide = test_config();
    wide.homework_window_utterances = 3;
    const std::string wide_window = homework_window_text(t, wide);
    CHECK(wide_window.find("写日记的作业完成得怎么样") != std::string::npos);
}

TEST_CASE("summary validation gates therapy-specific fields and statuses") {
    SessionSummary s;
    s.session_summary_abstract = "摘要";
    s.goal_assessment = {"目标", "1) 完全达成 (Completed)；2) 部分达成 (Partially Completed)",
                         "证据"};
    s.client_state_analysis.affective_state = "平稳";
    s.client_state_analysis.cognitive_patterns = "以偏概全";
    CHECK(validate_summary(s, {Therapy::cbt}).ok());

    // cbt-only selection forbids the other four analysis fields
    SessionSummary gated = s;
    gated.client_state_analysis.subconscious_manifestation = "防御";
    gated.client_state_analysis.personal_agency = "力量";
    gated.client_state_analysis.existentialism_topic = "孤独";
    gated.client_state_analysis.target_behavior = "回避";
    const auto report = validate_summary(gated, {Therapy::cbt});
    CHECK(report.violations.size() == 4);

    SessionSummary bad_status = s;
    bad_status.goal_assessment.completion_status = "大概完成了";
    const auto status_report = validate_summary(bad_status, {Therapy::cbt});
    REQUIRE_FALSE(status_report.ok());
    CHECK(status_report.violations[0].rule == "unknown_completion_status");
}

TEST_CASE("summarize_session rejects provenance violations and retries") {
    const SessionTranscript t = closing_transcript();
    TemplateRegistry r;
    r.add("dialogue_summary",
          "{{theory_select}}{{unlocked_client_info}}{{history}}{{session_focus}}{{session_dialogue}}{{plan}}");
    auto make_summary = [](std::vector<std::string> homework) {
        SessionSummary s;
        s.session_summary_abstract = "摘要";
        s.goal_assessment = {"目标", "1) 完全达成 (Completed)", "证据"};
        s.client_state_analysis.affective_state = "平稳";
        s.homework = std::move(homework);
        return canonical_json(to_json(s));
    };
    auto counter = std::make_shared<int>(0);
    auto provider = std::make_shared<ScriptedProvider>(
        "flaky-summarizer", [=](const RenderedRequest&) {
            return (++*counter == 1) ? make_summary({"写日记"})
                                     : make_summary({"记录两次情绪波动的ABC情境"});
        });
    Gateway gateway(r, provider);
    SessionSummary s = summarize_session(t, ClientProfile::empty_structured(), {}, {},
                                         cftest::fixture_plan(), {Therapy::cbt}, gateway,
                                         test_config());
    CHECK(*counter == 2);
    REQUIRE(s.homework.size() == 1);
    CHECK(s.homework[0] == "记录两次情绪波动的ABC情境");
}
