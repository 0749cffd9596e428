#include <doctest.h>

#include "counselforge/skills.hpp"
#include "counselforge/text.hpp"

#include "support/fixtures.hpp"

#include <algorithm>

using namespace counselforge;

TEST_CASE("fixture taxonomy loads with stable per-therapy counts") {
    auto result = cftest::fixture_taxonomy();
    REQUIRE(result.ok());
    CHECK(result.library.meta_total() == 20);
    CHECK(result.library.atomic_total() == 30);
    const auto counts = result.library.counts_per_therapy();
    for (const auto& [sect, c] : counts) {
        CHECK(c.first == 4);
        CHECK(c.second == 6);
    }
    // re-loading the same files yields identical totals
    auto again = cftest::fixture_taxonomy();
    CHECK(again.library.meta_total() == result.library.meta_total());
    CHECK(again.library.atomic_total() == result.library.atomic_total());
}

TEST_CASE("single root meta with one atomic child is a valid library of sizes (1,1)") {
    const std::string meta =
        R"({"skill_id":1,"skill_name":"根","skill_description":"根技能","parent_ids":[1],"sect":"cbt"})";
    const std::string atomic =
        R"({"skill_id":33,"skill_name":"叶","skill_description":"叶技能","when_to_use":"任意","trigger":"任意","parent_ids":[1,33],"sect":"cbt"})";
    auto result = load_taxonomy(meta + "\n", atomic + "\n");
    REQUIRE(result.ok());
    CHECK(result.library.meta_total() == 1);
    CHECK(result.library.atomic_total() == 1);
}

TEST_CASE("ancestor-only lineages are normalized to self-terminated") {
    const std::string meta =
        R"({"skill_id":3,"skill_name":"m","skill_description":"d","parent_ids":[3],"sect":"cbt"})";
    const std::string atomic =
        R"({"skill_id":9,"skill_name":"a","skill_description":"d","when_to_use":"w","trigger":"t","parent_ids":[3],"sect":"cbt"})";
    auto result = load_taxonomy(meta + "\n", atomic + "\n");
    REQUIRE(result.ok());
    CHECK(result.library.atomics()[0].parent_ids == std::vector<int>{3, 9});
}

TEST_CASE("dangling parent is reported with the missing id") {
    const std::string meta =
        R"({"skill_id":1,"skill_name":"m","skill_description":"d","parent_ids":[1],"sect":"cbt"})";
    const std::string atomic =
        R"({"skill_id":7,"skill_name":"a","skill_description":"d","when_to_use":"w","trigger":"t","parent_ids":[1,99,7],"sect":"cbt"})";
    auto result = load_taxonomy(meta + "\n", atomic + "\n");
    CHECK_FALSE(result.ok());
    REQUIRE(result.report.violations.size() == 1);
    CHECK(result.report.violations[0].rule == "dangling_parent");
    CHECK(result.report.violations[0].detail == "99");
}

TEST_CASE("duplicate ids within a sect are rejected; the same id across sects is fine") {
    const std::string dup =
        R"({"skill_id":1,"skill_name":"a","skill_description":"d","parent_ids":[1],"sect":"cbt"})"
        "\n"
        R"({"skill_id":1,"skill_name":"b","skill_description":"d","parent_ids":[1],"sect":"cbt"})";
    auto bad = load_taxonomy(dup, "");
    CHECK_FALSE(bad.ok());
    CHECK(bad.report.violations[0].rule == "duplicate_id");

    const std::string cross =
        R"({"skill_id":1,"skill_name":"a","skill_description":"d","parent_ids":[1],"sect":"cbt"})"
        "\n"
        R"({"skill_id":1,"skill_name":"b","skill_description":"d","parent_ids":[1],"sect":"pdt"})";
    CHECK(load_taxonomy(cross, "").ok());
}

TEST_CASE("mutually parented metas are a cycle") {
    const std::string meta =
        R"({"skill_id":1,"skill_name":"a","skill_description":"d","parent_ids":[2,1],"sect":"cbt"})"
        "\n"
        R"({"skill_id":2,"skill_name":"b","skill_description":"d","parent_ids":[1,2],"sect":"cbt"})";
    auto result = load_taxonomy(meta, "");
    CHECK_FALSE(result.ok());
    bool cycle = false;
    for (const auto& v : result.report.violations)
        if (v.rule == "cycle_detected") cycle = true;
    CHECK(cycle);
}

TEST_CASE("numeric-string ids are accepted") {
    const std::string meta =
        R"({"skill_id":"12","skill_name":"m","skill_description":"d","parent_ids":["12"],"sect":"het"})";
    auto result = load_taxonomy(meta + "\n", "");
    REQUIRE(result.ok());
    CHECK(result.library.metas()[0].skill_id == 12);
}

TEST_CASE("coarse filter selects by sect and stage tag, ordered by (sect, id)") {
    auto taxonomy = cftest::fixture_taxonomy();
    const auto cbt_stage1 = coarse_filter(taxonomy.library, {Therapy::cbt}, 1);
    REQUIRE(cbt_stage1.size() == 2);  // untagged root + stage-1 meta
    CHECK(cbt_stage1[0].skill_id == 1);
    CHECK(cbt_stage1[1].skill_id == 2);
    for (const auto& m : cbt_stage1) CHECK(m.sect == Therapy::cbt);

    const auto both = coarse_filter(taxonomy.library, {Therapy::het, Therapy::cbt}, 1);
    REQUIRE(both.size() == 4);
    CHECK(both[0].sect == Therapy::cbt);  // cbt < het
    CHECK(both[2].sect == Therapy::het);
    CHECK(both[0].skill_id <= both[1].skill_id);
}

TEST_CASE("coarse filter equals an exhaustive linear scan") {
    auto taxonomy = cftest::fixture_taxonomy();
    const auto filtered = coarse_filter(taxonomy.library, {Therapy::pmt}, 2);
    std::vector<MetaSkill> expected;
    for (const auto& m : taxonomy.library.metas())
        if (m.sect == Therapy::pmt && m.stage_tags.count(2)) expected.push_back(m);
    std::sort(expected.begin(), expected.end(),
              [](const MetaSkill& a, const MetaSkill& b) { return a.skill_id < b.skill_id; });
    REQUIRE(filtered.size() == expected.size());
    for (size_t i = 0; i < filtered.size(); ++i) CHECK(filtered[i] == expected[i]);
    // filtering is idempotent: every returned meta passes the same predicate
    for (const auto& m : filtered) {
        CHECK(m.sect == Therapy::pmt);
        CHECK(m.stage_tags.count(2) == 1);
    }
}

TEST_CASE("coarse filter rejects an empty therapy set") {
    auto taxonomy = cftest::fixture_taxonomy();
    CHECK_THROWS_AS(coarse_filter(taxonomy.library, {}, 1), std::invalid_argument);
}

TEST_CASE("fallback selection matches exhaustive overlap scoring") {
    auto taxonomy = cftest::fixture_taxonomy();
    const auto coarse = coarse_filter(taxonomy.library, {Therapy::cbt}, 1);
    const std::vector<std::string> objectives = {"初次会谈需要了解基本信息并降低紧张",
                                                 "说明设置并建立信任"};
    const SkillCandidateSet set = fallback_select(taxonomy.library, coarse, objectives, 3);
    CHECK(set.total == 3);

    // brute-force oracle: score every distinct atomic under the coarse metas
    std::string goal_text;
    for (const auto& o : objectives) goal_text += o + "\n";
    const auto goal_grams = text::char_bigrams(goal_text);
    std::vector<std::pair<double, int>> scored;  // (score, id)
    std::set<int> seen;
    for (const auto& m : coarse) {
        for (const AtomicSkill* a : taxonomy.library.atomics_under(m)) {
            if (!seen.insert(a->skill_id).second) continue;
            const auto grams = text::char_bigrams(a->when_to_use + a->trigger);
            size_t inter = 0;
            for (const auto& g : grams) inter += goal_grams.count(g);
            scored.push_back({grams.empty() ? 0.0 : double(inter) / double(grams.size()),
                              a->skill_id});
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    std::set<int> expected_ids = {scored[0].second, scored[1].second, scored[2].second};
    std::set<int> got_ids;
    for (const auto& g : set.groups)
        for (const auto& a : g.atomic_skills) got_ids.insert(a.skill_id);
    CHECK(got_ids == expected_ids);
}

TEST_CASE("candidate-set integrity gate") {
    auto taxonomy = cftest::fixture_taxonomy();
    const auto coarse = coarse_filter(taxonomy.library, {Therapy::cbt}, 1);
    SkillCandidateSet set = fallback_select(taxonomy.library, coarse, {"评估"}, 4);
    CHECK(verify_candidate_set(set, taxonomy.library, 60).ok());

    SkillCandidateSet altered = set;
    altered.groups[0].atomic_skills[0].skill_description += "（被改写）";
    const auto report = verify_candidate_set(altered, taxonomy.library, 60);
    CHECK_FALSE(report.ok());
    CHECK(report.violations[0].rule == "skill_altered");

    SkillCandidateSet unknown = set;
    unknown.groups[0].atomic_skills[0].skill_id = 9999;
    CHECK_FALSE(verify_candidate_set(unknown, taxonomy.library, 60).ok());

    SkillCandidateSet overfull = set;
    CHECK_FALSE(verify_candidate_set(overfull, taxonomy.library, 1).ok());

    SkillCandidateSet wrong_total = set;
    wrong_total.total += 1;
    const auto total_report = verify_candidate_set(wrong_total, taxonomy.library, 60);
    bool mismatch = false;
    for (const auto& v : total_report.violations)
        if (v.rule == "total_mismatch") mismatch = true;
    CHECK(mismatch);
}

TEST_CASE("skill refs resolve by name or description under normalization") {
    auto taxonomy = cftest::fixture_taxonomy();
    const auto coarse = coarse_filter(taxonomy.library, {Therapy::cbt}, 1);
    const SkillCandidateSet set = fallback_select(taxonomy.library, coarse, {"评估"}, 6);
    const AtomicSkill& first = set.groups[0].atomic_skills[0];

    auto by_description = resolve_skill_ref(set, {first.skill_id, first.skill_description});
    CHECK(std::holds_alternative<const AtomicSkill*>(by_description));

    auto by_name = resolve_skill_ref(set, {first.skill_id, first.skill_name});
    CHECK(std::holds_alternative<const AtomicSkill*>(by_name));

    auto with_period = resolve_skill_ref(set, {first.skill_id, first.skill_name + "。"});
    CHECK(std::holds_alternative<const AtomicSkill*>(with_period));

    auto unknown = resolve_skill_ref(set, {424242, first.skill_description});
    REQUIRE(std::holds_alternative<SkillRefError>(unknown));
    CHECK(std::get<SkillRefError>(unknown).kind == SkillRefErrorKind::unknown_id);

    auto drifted = resolve_skill_ref(set, {first.skill_id, first.skill_description + "，并另加一句"});
    REQUIRE(std::holds_alternative<SkillRefError>(drifted));
    CHECK(std::get<SkillRefError>(drifted).kind == SkillRefErrorKind::description_drift);
    CHECK(std::get<SkillRefError>(drifted).stored == first.skill_description);
}
