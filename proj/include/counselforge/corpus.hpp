#pragma once

#include "counselforge/case_record.hpp"
#include "counselforge/skills.hpp"
#include "counselforge/validation.hpp"

#include <array>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace counselforge {

struct CorpusLoadOptions {
    // Renames top-level-or-nested keys before schema parsing, so corpora with
    // slightly different field names load without code changes.
    std::map<std::string, std::string> field_aliases;
    size_t max_line_bytes = 64ull * 1024 * 1024;
};

// JSONL corpus: one case per line, parsed in a streaming fashion. Bad lines
// land in the error ledger, valid cases load; loading never aborts on the
// first failure.
struct Corpus {
    std::vector<CaseRecord> cases;
    ValidationReport errors;  // per-line entries, path = "line N"
};

Corpus load_corpus(std::istream& in, const CorpusLoadOptions& options = {});
Corpus load_corpus_file(const std::string& path, const CorpusLoadOptions& options = {});

Json apply_field_aliases(Json j, const std::map<std::string, std::string>& aliases);

struct GroupStats {
    size_t n_samples = 0;
    double avg_sessions = 0;
    double avg_turns = 0;
    double avg_words_with_think = 0;
    double avg_words_without_think = 0;
    int max_sessions = 0;
};

struct CorpusStats {
    size_t n_samples = 0;
    std::map<std::string, GroupStats> per_therapy;
    GroupStats total;
    std::map<std::string, size_t> topic_histogram;
    // therapy -> (meta, atomic); filled when a skill library is supplied
    std::map<std::string, std::pair<size_t, size_t>> skill_counts;
    size_t meta_total = 0;
    size_t atomic_total = 0;
};

// Counting conventions: one turn = one counselor+client adjacent pair; word
// counts use the CJK-character / alphanumeric-run rule; the with-think figure
// adds the four think fields of counselor utterances.
CorpusStats compute_stats(const Corpus& corpus, const SkillLibrary* lib = nullptr);

struct StageStats {
    double avg_sessions_per_case = 0;
    double avg_persona_links_per_session = 0;
    double avg_case_materials_per_session = 0;
    double avg_objectives_per_session = 0;
};

struct PlanStats {
    StageStats overall;
    std::array<StageStats, 3> per_stage;
};

PlanStats compute_plan_stats(const Corpus& corpus);

Json to_json(const CorpusStats& s);
Json to_json(const PlanStats& s);

// Word count of one utterance under the corpus convention.
size_t utterance_words_spoken(const Utterance& u);
size_t utterance_words_with_think(const Utterance& u);

}  // namespace counselforge
