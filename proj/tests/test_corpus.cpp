#include <doctest.h>

#include "counselforge/corpus.hpp"

#include "support/fixtures.hpp"

#include <algorithm>
#include <sstream>

using namespace counselforge;

namespace {

CaseRecord mock_case(const std::string& id) {
    auto taxonomy = cftest::fixture_taxonomy();
    auto gateway = std::make_shared<Gateway>(cftest::load_repo_templates(),
                                             cftest::make_mock_provider());
    SessionEngine engine(taxonomy.library, gateway, cftest::fixture_engine_config());
    return engine.run_case(cftest::fixture_seed(id));
}

Utterance counselor_utt(const std::string& assessment, const std::string& spoken) {
    ThinkTrace t;
    t.assessment = assessment;
    t.client_state = "平稳";
    t.skill_refs = {{1, "skillA"}};
    t.strategy = "推进";
    Utterance u;
    u.role = Role::counselor;
    u.text = render_think_trace(t) + spoken;
    u.think = t;
    u.spoken_text = spoken;
    return u;
}

Utterance client_utt(const std::string& text) {
    Utterance u;
    u.role = Role::client;
    u.text = text;
    u.spoken_text = text;
    return u;
}

// A tiny hand-countable case: one session, two turns, four utterances.
CaseRecord tally_case() {
    CaseRecord r;
    r.case_id = "tally-1";
    r.therapy = Therapy::bt;
    r.client_info = ClientProfile::empty_structured();
    r.client_info.basic_info.topic = "情绪管理";
    r.global_plan = cftest::fixture_plan();
    SessionEntry entry;
    entry.transcript.session_number = 1;
    entry.transcript.theory_select = {Therapy::bt};
    entry.transcript.goals.objective = {"目标一", "目标二"};
    // spoken 你好吗 = 3 words; think: 评估(2) + 平稳(2) + "1"(1) + skillA(1) + 推进(2) = 8
    entry.transcript.utterances.push_back(counselor_utt("评估", "你好吗"));
    // 很好 = 2
    entry.transcript.utterances.push_back(client_utt("很好"));
    // spoken 再见了 = 3; think = 8 again
    entry.transcript.utterances.push_back(counselor_utt("评估", "再见了"));
    // 好的bye = 2 CJK + 1 run = 3
    entry.transcript.utterances.push_back(client_utt("好的bye"));
    entry.unlocked_after = ClientProfile::empty_structured();
    r.sessions.push_back(std::move(entry));
    return r;
}

}  // namespace

TEST_CASE("corpus loading keeps valid lines and ledgers the bad ones") {
    const CaseRecord valid = mock_case("ld-1");
    const std::string line = canonical_json(to_json(valid));
    std::istringstream in(line + "\n{broken json\n" + line + "\n");
    const Corpus corpus = load_corpus(in);
    CHECK(corpus.cases.size() == 2);
    CHECK_FALSE(corpus.errors.ok());
    CHECK(corpus.errors.violations[0].path.find("line 2") == 0);

    std::istringstream empty("");
    const Corpus none = load_corpus(empty);
    CHECK(none.cases.empty());
    CHECK(none.errors.ok());
}

TEST_CASE("word and turn stats match a hand tally on a four-utterance fixture") {
    Corpus corpus;
    corpus.cases.push_back(tally_case());
    const CorpusStats stats = compute_stats(corpus);
    CHECK(stats.n_samples == 1);
    CHECK(stats.total.avg_sessions == doctest::Approx(1.0));
    CHECK(stats.total.max_sessions == 1);
    CHECK(stats.total.avg_turns == doctest::Approx(2.0));
    // spoken: 3 + 2 + 3 + 3 = 11 words over 2 turns
    CHECK(stats.total.avg_words_without_think == doctest::Approx(11.0 / 2.0));
    // with think: 11 + 8 + 8 = 27 words over 2 turns
    CHECK(stats.total.avg_words_with_think == doctest::Approx(27.0 / 2.0));
    CHECK(stats.topic_histogram.at("情绪管理") == 1);
    CHECK(stats.per_therapy.at("bt").n_samples == 1);
}

TEST_CASE("single case: two sessions of ten turns each") {
    CaseRecord r = tally_case();
    r.sessions.push_back(r.sessions[0]);
    r.sessions[1].transcript.session_number = 2;
    for (auto& session : r.sessions) {
        session.transcript.utterances.clear();
        for (int i = 0; i < 10; ++i) {
            session.transcript.utterances.push_back(counselor_utt("评估", "问题"));
            session.transcript.utterances.push_back(client_utt("回答"));
        }
    }
    Corpus corpus;
    corpus.cases.push_back(r);
    const CorpusStats stats = compute_stats(corpus);
    CHECK(stats.total.avg_sessions == doctest::Approx(2.0));
    CHECK(stats.total.avg_turns == doctest::Approx(10.0));
}

TEST_CASE("stats are invariant under corpus permutation") {
    Corpus forward;
    forward.cases.push_back(mock_case("perm-1"));
    forward.cases.push_back(tally_case());
    Corpus backward;
    backward.cases.push_back(forward.cases[1]);
    backward.cases.push_back(forward.cases[0]);
    CHECK(canonical_json(to_json(compute_stats(forward))) ==
          canonical_json(to_json(compute_stats(backward))));
}

TEST_CASE("stats include taxonomy counts when a library is supplied") {
    auto taxonomy = cftest::fixture_taxonomy();
    Corpus corpus;
    corpus.cases.push_back(tally_case());
    const CorpusStats stats = compute_stats(corpus, &taxonomy.library);
    CHECK(stats.meta_total == 20);
    CHECK(stats.atomic_total == 30);
    CHECK(stats.skill_counts.at("cbt").first == 4);
    CHECK(stats.skill_counts.at("cbt").second == 6);
}

TEST_CASE("empty corpus raises a typed error") {
    Corpus corpus;
    CHECK_THROWS_AS(compute_stats(corpus), CfError);
    CHECK_THROWS_AS(compute_plan_stats(corpus), CfError);
}

TEST_CASE("plan stats: stage session counts (2,4,2) with uniform three persona links") {
    CaseRecord r;
    r.case_id = "plan-242";
    r.therapy = Therapy::cbt;
    r.client_info = ClientProfile::empty_structured();
    TherapeuticPlan plan;
    int session = 1;
    const std::vector<std::pair<std::string, int>> layout = {
        {"问题概念化与目标设定", 2}, {"核心认知与行为干预", 4}, {"巩固与复发预防", 2}};
    for (size_t stage_idx = 0; stage_idx < layout.size(); ++stage_idx) {
        PlanStage stage;
        stage.stage_number = static_cast<int>(stage_idx) + 1;
        stage.stage_name = layout[stage_idx].first;
        stage.sessions = "第" + std::to_string(session) + "-第" +
                         std::to_string(session + layout[stage_idx].second - 1) + "次";
        for (int k = 0; k < layout[stage_idx].second; ++k) {
            SessionPlanContent c;
            c.session_index = session++;
            c.theory_select = {Therapy::cbt};
            c.theme = "第" + std::to_string(c.session_index) + "次主题";
            c.persona_links = {"a: 链接一", "b: 链接二", "c: 链接三"};
            c.case_material = {"任务一", "任务二"};
            c.rationale = {"依据"};
            stage.content.push_back(std::move(c));
        }
        plan.stages.push_back(std::move(stage));
    }
    r.global_plan = plan;
    Corpus corpus;
    corpus.cases.push_back(r);
    const PlanStats stats = compute_plan_stats(corpus);
    CHECK(stats.per_stage[0].avg_sessions_per_case == doctest::Approx(2.0));
    CHECK(stats.per_stage[1].avg_sessions_per_case == doctest::Approx(4.0));
    CHECK(stats.per_stage[2].avg_sessions_per_case == doctest::Approx(2.0));
    CHECK(stats.overall.avg_sessions_per_case == doctest::Approx(8.0));
    for (const auto& stage : stats.per_stage) {
        CHECK(stage.avg_persona_links_per_session == doctest::Approx(3.0));
        CHECK(stage.avg_case_materials_per_session == doctest::Approx(2.0));
    }
    // per-stage session sums are exact against the overall figure
    CHECK(stats.per_stage[0].avg_sessions_per_case + stats.per_stage[1].avg_sessions_per_case +
              stats.per_stage[2].avg_sessions_per_case ==
          doctest::Approx(stats.overall.avg_sessions_per_case));
}

TEST_CASE("plan stats derive objectives per stage from session goals") {
    CaseRecord r = mock_case("plan-obj");
    Corpus corpus;
    corpus.cases.push_back(r);
    const PlanStats stats = compute_plan_stats(corpus);
    // fixture: stage 1 holds sessions 1-2, stage 2 sessions 3-4, stage 3 session 5
    CHECK(stats.per_stage[0].avg_sessions_per_case == doctest::Approx(2.0));
    CHECK(stats.per_stage[2].avg_sessions_per_case == doctest::Approx(1.0));
    // every mock session carries objectives: opening + per-material + closing
    CHECK(stats.overall.avg_objectives_per_session > 0);
    double weighted = 0;
    for (size_t i = 0; i < 3; ++i)
        weighted += stats.per_stage[i].avg_objectives_per_session *
                    stats.per_stage[i].avg_sessions_per_case;
    CHECK(weighted / stats.overall.avg_sessions_per_case ==
          doctest::Approx(stats.overall.avg_objectives_per_session));
}

TEST_CASE("field aliases rename keys before schema parsing") {
    CaseRecord r = tally_case();
    Json j = to_json(r);
    j["patient_info"] = j["client_info"];
    j.erase("client_info");
    std::istringstream in(canonical_json(j) + "\n");
    CorpusLoadOptions options;
    options.field_aliases["patient_info"] = "client_info";
    const Corpus corpus = load_corpus(in, options);
    CHECK(corpus.errors.ok());
    REQUIRE(corpus.cases.size() == 1);
    CHECK(corpus.cases[0].client_info.basic_info.topic == "情绪管理");

    // without the alias the line fails schema validation
    std::istringstream again(canonical_json(j) + "\n");
    const Corpus unaliased = load_corpus(again);
    CHECK(unaliased.cases.empty());
}

TEST_CASE("oversized corpus lines are ledgered, not parsed") {
    CorpusLoadOptions options;
    options.max_line_bytes = 64;
    std::istringstream in(std::string(100, 'x') + "\n");
    const Corpus corpus = load_corpus(in, options);
    CHECK(corpus.cases.empty());
    REQUIRE(corpus.errors.violations.size() == 1);
    CHECK(corpus.errors.violations[0].rule == "line_too_long");
}

TEST_CASE("stats are identical for any worker count (map-reduce determinism)") {
    Corpus corpus;
    for (int i = 0; i < 130; ++i) corpus.cases.push_back(tally_case());
    // 130 cases crosses the chunking threshold; compare against a 1-case slice
    const CorpusStats parallel = compute_stats(corpus);
    Corpus single;
    single.cases.push_back(tally_case());
    const CorpusStats sequential = compute_stats(single);
    CHECK(parallel.total.avg_turns == doctest::Approx(sequential.total.avg_turns));
    CHECK(parallel.total.avg_words_with_think ==
          doctest::Approx(sequential.total.avg_words_with_think));
    CHECK(parallel.n_samples == 130);
    CHECK(parallel.topic_histogram.at("情绪管理") == 130);
}
