#include "counselforge/corpus.hpp"

#include "counselforge/errors.hpp"
#include "counselforge/text.hpp"

#include <fstream>
#include <thread>

namespace counselforge {

Json apply_field_aliases(Json j, const std::map<std::string, std::string>& aliases) {
    if (aliases.empty()) return j;
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [key, value] : j.items()) {
            auto alias = aliases.find(key);
            out[alias == aliases.end() ? key : alias->second] =
                apply_field_aliases(value, aliases);
        }
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& value : j) out.push_back(apply_field_aliases(value, aliases));
        return out;
    }
    return j;
}

Corpus load_corpus(std::istream& in, const CorpusLoadOptions& options) {
    Corpus corpus;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.size() > options.max_line_bytes) {
            corpus.errors.add("line " + std::to_string(line_no), "line_too_long",
                              std::to_string(line.size()) + " bytes");
            continue;
        }
        if (text::trim(line).empty()) continue;
        CaseParseResult result;
        if (options.field_aliases.empty()) {
            result = parse_case_record(line);
        } else {
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                corpus.errors.add("line " + std::to_string(line_no) + " $", "malformed_json", "");
                continue;
            }
            result = parse_case_record(apply_field_aliases(std::move(j), options.field_aliases));
        }
        if (result.ok()) {
            corpus.cases.push_back(std::move(*result.record));
        } else {
            for (const auto& v : result.report.violations)
                corpus.errors.add("line " + std::to_string(line_no) + " " + v.path, v.rule,
                                  v.detail);
        }
    }
    return corpus;
}

Corpus load_corpus_file(const std::string& path, const CorpusLoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CfError(errkind::io_error, "cannot open corpus " + path);
    return load_corpus(in, options);
}

size_t utterance_words_spoken(const Utterance& u) { return text::count_words(u.spoken_text); }

size_t utterance_words_with_think(const Utterance& u) {
    size_t words = text::count_words(u.spoken_text);
    if (u.think) {
        words += text::count_words(u.think->assessment);
        words += text::count_words(u.think->client_state);
        for (const auto& ref : u.think->skill_refs) {
            words += text::count_words(std::to_string(ref.skill_id));
            words += text::count_words(ref.description);
        }
        words += text::count_words(u.think->strategy);
    }
    return words;
}

namespace {

struct Accumulator {
    size_t cases = 0;
    size_t sessions = 0;
    size_t turns = 0;
    size_t words_spoken = 0;
    size_t words_with_think = 0;
    int max_sessions = 0;

    void add_case(const CaseRecord& r) {
        ++cases;
        sessions += r.sessions.size();
        max_sessions = std::max(max_sessions, static_cast<int>(r.sessions.size()));
        for (const auto& s : r.sessions) {
            turns += s.transcript.turn_count();
            for (const auto& u : s.transcript.utterances) {
                words_spoken += utterance_words_spoken(u);
                words_with_think += utterance_words_with_think(u);
            }
        }
    }

    void merge(const Accumulator& other) {
        cases += other.cases;
        sessions += other.sessions;
        turns += other.turns;
        words_spoken += other.words_spoken;
        words_with_think += other.words_with_think;
        max_sessions = std::max(max_sessions, other.max_sessions);
    }

    GroupStats finish() const {
        GroupStats g;
        g.n_samples = cases;
        g.max_sessions = max_sessions;
        if (cases) g.avg_sessions = static_cast<double>(sessions) / static_cast<double>(cases);
        if (sessions) g.avg_turns = static_cast<double>(turns) / static_cast<double>(sessions);
        if (turns) {
            g.avg_words_without_think =
                static_cast<double>(words_spoken) / static_cast<double>(turns);
            g.avg_words_with_think =
                static_cast<double>(words_with_think) / static_cast<double>(turns);
        }
        return g;
    }
};

struct Partial {
    std::map<std::string, Accumulator> per_therapy;
    Accumulator total;
    std::map<std::string, size_t> topics;

    void add_case(const CaseRecord& r) {
        per_therapy[to_string(r.therapy)].add_case(r);
        total.add_case(r);
        const std::string& topic = r.client_info.basic_info.topic;
        if (!topic.empty()) topics[topic]++;
    }
};

}  // namespace

CorpusStats compute_stats(const Corpus& corpus, const SkillLibrary* lib) {
    if (corpus.cases.empty()) throw CfError(errkind::empty_corpus, "corpus has no valid cases");
    CorpusStats stats;
    stats.n_samples = corpus.cases.size();

    // Map-reduce over case chunks; every partial is additive, so the reduced
    // result does not depend on the thread count.
    const size_t hw = std::max<size_t>(1, std::thread::hardware_concurrency());
    const size_t workers = std::min<size_t>({hw, 8, (corpus.cases.size() + 63) / 64});
    std::vector<Partial> partials(std::max<size_t>(workers, 1));
    if (workers <= 1) {
        for (const auto& r : corpus.cases) partials[0].add_case(r);
    } else {
        std::vector<std::thread> threads;
        const size_t chunk = (corpus.cases.size() + workers - 1) / workers;
        for (size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&, w] {
                const size_t begin = w * chunk;
                const size_t end = std::min(corpus.cases.size(), begin + chunk);
                for (size_t i = begin; i < end; ++i) partials[w].add_case(corpus.cases[i]);
            });
        }
        for (auto& t : threads) t.join();
    }
    Partial combined;
    for (const auto& p : partials) {
        combined.total.merge(p.total);
        for (const auto& [therapy, acc] : p.per_therapy)
            combined.per_therapy[therapy].merge(acc);
        for (const auto& [topic, count] : p.topics) combined.topics[topic] += count;
    }
    for (const auto& [therapy, acc] : combined.per_therapy)
        stats.per_therapy[therapy] = acc.finish();
    stats.total = combined.total.finish();
    stats.topic_histogram = combined.topics;
    if (lib) {
        stats.skill_counts = lib->counts_per_therapy();
        stats.meta_total = lib->meta_total();
        stats.atomic_total = lib->atomic_total();
    }
    return stats;
}

PlanStats compute_plan_stats(const Corpus& corpus) {
    if (corpus.cases.empty()) throw CfError(errkind::empty_corpus, "corpus has no valid cases");
    struct StageAcc {
        size_t entries = 0;
        size_t links = 0;
        size_t materials = 0;
        size_t sessions_with_goals = 0;
        size_t objectives = 0;
    };
    std::array<StageAcc, 3> stages;
    StageAcc overall;
    size_t cases = corpus.cases.size();
    std::array<size_t, 3> stage_session_sum = {0, 0, 0};
    size_t total_session_sum = 0;

    for (const auto& r : corpus.cases) {
        for (const auto& stage : r.global_plan.stages) {
            if (stage.stage_number < 1 || stage.stage_number > 3) continue;
            auto& acc = stages[static_cast<size_t>(stage.stage_number - 1)];
            stage_session_sum[static_cast<size_t>(stage.stage_number - 1)] += stage.content.size();
            total_session_sum += stage.content.size();
            for (const auto& c : stage.content) {
                acc.entries++;
                acc.links += c.persona_links.size();
                acc.materials += c.case_material.size();
                overall.entries++;
                overall.links += c.persona_links.size();
                overall.materials += c.case_material.size();
            }
        }
        for (const auto& s : r.sessions) {
            const int stage_no = r.global_plan.stage_of_session(s.transcript.session_number);
            const size_t objectives = s.transcript.goals.objective.size();
            overall.sessions_with_goals++;
            overall.objectives += objectives;
            if (stage_no >= 1 && stage_no <= 3) {
                auto& acc = stages[static_cast<size_t>(stage_no - 1)];
                acc.sessions_with_goals++;
                acc.objectives += objectives;
            }
        }
    }

    auto finish = [cases](const StageAcc& acc, size_t session_sum) {
        StageStats s;
        s.avg_sessions_per_case = static_cast<double>(session_sum) / static_cast<double>(cases);
        if (acc.entries) {
            s.avg_persona_links_per_session =
                static_cast<double>(acc.links) / static_cast<double>(acc.entries);
            s.avg_case_materials_per_session =
                static_cast<double>(acc.materials) / static_cast<double>(acc.entries);
        }
        if (acc.sessions_with_goals)
            s.avg_objectives_per_session =
                static_cast<double>(acc.objectives) / static_cast<double>(acc.sessions_with_goals);
        return s;
    };

    PlanStats out;
    out.overall = finish(overall, total_session_sum);
    for (size_t i = 0; i < 3; ++i) out.per_stage[i] = finish(stages[i], stage_session_sum[i]);
    return out;
}

namespace {

Json to_json(const GroupStats& g) {
    Json j;
    j["n_samples"] = g.n_samples;
    j["avg_sessions"] = g.avg_sessions;
    j["avg_turns"] = g.avg_turns;
    j["avg_words_with_think"] = g.avg_words_with_think;
    j["avg_words_without_think"] = g.avg_words_without_think;
    j["max_sessions"] = g.max_sessions;
    return j;
}

Json to_json(const StageStats& s) {
    Json j;
    j["avg_sessions_per_case"] = s.avg_sessions_per_case;
    j["avg_persona_links_per_session"] = s.avg_persona_links_per_session;
    j["avg_case_materials_per_session"] = s.avg_case_materials_per_session;
    j["avg_objectives_per_session"] = s.avg_objectives_per_session;
    return j;
}

}  // namespace

Json to_json(const CorpusStats& s) {
    Json j;
    j["n_samples"] = s.n_samples;
    Json per_therapy = Json::object();
    for (const auto& [therapy, g] : s.per_therapy) per_therapy[therapy] = to_json(g);
    j["per_therapy"] = std::move(per_therapy);
    j["total"] = to_json(s.total);
    Json topics = Json::object();
    for (const auto& [topic, count] : s.topic_histogram) topics[topic] = count;
    j["topic_histogram"] = std::move(topics);
    Json skills = Json::object();
    for (const auto& [therapy, counts] : s.skill_counts) {
        Json e;
        e["meta"] = counts.first;
        e["atomic"] = counts.second;
        skills[therapy] = std::move(e);
    }
    j["skill_counts"] = std::move(skills);
    j["meta_total"] = s.meta_total;
    j["atomic_total"] = s.atomic_total;
    return j;
}

Json to_json(const PlanStats& s) {
    Json j;
    j["overall"] = to_json(s.overall);
    Json stages = Json::array();
    for (const auto& stage : s.per_stage) stages.push_back(to_json(stage));
    j["per_stage"] = std::move(stages);
    return j;
}

}  // namespace counselforge
