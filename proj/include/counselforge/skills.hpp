#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/think.hpp"
#include "counselforge/validation.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace counselforge {

// Strategic branch node of the skill tree.
struct MetaSkill {
    int skill_id = 0;
    std::string skill_name;
    std::string skill_description;
    std::vector<int> parent_ids;  // root-first lineage, normalized to end with skill_id
    Therapy sect = Therapy::cbt;
    std::set<int> stage_tags = {1, 2, 3};  // absent in file means all stages

    bool operator==(const MetaSkill&) const = default;
};

// Tactical leaf node with timing metadata.
struct AtomicSkill {
    int skill_id = 0;
    std::string skill_name;
    std::string skill_description;
    std::string when_to_use;
    std::string trigger;
    std::vector<int> parent_ids;
    Therapy sect = Therapy::cbt;

    bool operator==(const AtomicSkill&) const = default;
};

struct SkillGroup {
    std::string meta_skill;  // concatenated meta descriptions
    std::vector<AtomicSkill> atomic_skills;
};

struct SkillCandidateSet {
    std::vector<SkillGroup> groups;
    int total = 0;

    bool empty() const { return total == 0; }
    const AtomicSkill* find(int skill_id) const;
};

Json to_json(const AtomicSkill& s);
Json to_json(const SkillCandidateSet& s);
SkillCandidateSet parse_candidate_set(const Json& j, ValidationReport& report,
                                      const std::string& base = "$");

class SkillLibrary {
  public:
    const std::vector<MetaSkill>& metas() const { return metas_; }
    const std::vector<AtomicSkill>& atomics() const { return atomics_; }

    const MetaSkill* find_meta(Therapy sect, int id) const;
    const AtomicSkill* find_atomic(Therapy sect, int id) const;
    std::vector<const AtomicSkill*> atomics_under(const MetaSkill& meta) const;

    // Counts per therapy plus totals.
    std::map<std::string, std::pair<size_t, size_t>> counts_per_therapy() const;
    size_t meta_total() const { return metas_.size(); }
    size_t atomic_total() const { return atomics_.size(); }

    friend struct SkillLibraryLoader;

  private:
    std::vector<MetaSkill> metas_;
    std::vector<AtomicSkill> atomics_;
    std::map<std::pair<int, int>, size_t> meta_index_;    // (sect, id) -> index
    std::map<std::pair<int, int>, size_t> atomic_index_;  // (sect, id) -> index
};

// Loads the two JSONL documents (one JSON object per line). Violation rules:
// dangling_parent, duplicate_id, cycle_detected, plus structural errors.
struct TaxonomyLoadResult {
    SkillLibrary library;
    ValidationReport report;
    bool ok() const { return report.ok(); }
};

TaxonomyLoadResult load_taxonomy(const std::string& meta_jsonl, const std::string& atomic_jsonl);
TaxonomyLoadResult load_taxonomy_files(const std::string& meta_path, const std::string& atomic_path);

// Meta skills whose sect is in `therapies` and whose stage tags include
// `stage`, ordered by (sect, skill_id). Throws std::invalid_argument on an
// empty therapy set.
std::vector<MetaSkill> coarse_filter(const SkillLibrary& lib, const std::vector<Therapy>& therapies,
                                     int stage);

// Deterministic fallback ranking: top-K atomics under the coarse metas by
// bigram overlap of when_to_use+trigger against the objective texts, ties by
// (sect, skill_id).
SkillCandidateSet fallback_select(const SkillLibrary& lib, const std::vector<MetaSkill>& coarse,
                                  const std::vector<std::string>& objectives, int k);

// Integrity gate for provider-selected candidate sets: every skill must exist
// verbatim in the library (id, name, description byte-equal) under one of the
// coarse metas' sects, and total must be <= k.
ValidationReport verify_candidate_set(const SkillCandidateSet& set, const SkillLibrary& lib, int k);

enum class SkillRefErrorKind { unknown_id, description_drift };

struct SkillRefError {
    SkillRefErrorKind kind;
    std::string stored;
    std::string cited;
};

// Resolves a think-trace citation against the session's candidate set. The
// cited text may be the skill name or its description; comparison happens
// after trim + terminal-punctuation normalization.
std::variant<const AtomicSkill*, SkillRefError> resolve_skill_ref(const SkillCandidateSet& set,
                                                                  const SkillRef& ref);

}  // namespace counselforge
