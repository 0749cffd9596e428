#include "counselforge/skills.hpp"

#include "counselforge/text.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace counselforge {

const AtomicSkill* SkillCandidateSet::find(int skill_id) const {
    for (const auto& g : groups)
        for (const auto& a : g.atomic_skills)
            if (a.skill_id == skill_id) return &a;
    return nullptr;
}

Json to_json(const AtomicSkill& s) {
    Json j;
    j["skill_id"] = s.skill_id;
    j["skill_name"] = s.skill_name;
    j["skill_description"] = s.skill_description;
    j["when_to_use"] = s.when_to_use;
    j["trigger"] = s.trigger;
    j["parent_ids"] = s.parent_ids;
    j["sect"] = to_string(s.sect);
    return j;
}

Json to_json(const SkillCandidateSet& s) {
    Json j;
    Json groups = Json::array();
    for (const auto& g : s.groups) {
        Json jg;
        jg["meta_skill"] = g.meta_skill;
        Json atomics = Json::array();
        for (const auto& a : g.atomic_skills) atomics.push_back(to_json(a));
        jg["atomic_skills"] = std::move(atomics);
        groups.push_back(std::move(jg));
    }
    j["groups"] = std::move(groups);
    j["total"] = s.total;
    return j;
}

namespace {

// Accepts integer or numeric-string ids (the released files mix both).
std::optional<int> parse_id(const Json& v) {
    if (v.is_number_integer()) return v.get<int>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos)
            return std::nullopt;
        return std::stoi(s);
    }
    return std::nullopt;
}

std::optional<std::vector<int>> parse_id_list(const Json& v) {
    if (!v.is_array()) return std::nullopt;
    std::vector<int> out;
    for (const auto& e : v) {
        auto id = parse_id(e);
        if (!id) return std::nullopt;
        out.push_back(*id);
    }
    return out;
}

std::string opt_string(const Json& j, const char* key) {
    if (j.contains(key) && j.at(key).is_string()) return j.at(key).get<std::string>();
    return {};
}

}  // namespace

SkillCandidateSet parse_candidate_set(const Json& j, ValidationReport& report,
                                      const std::string& base) {
    SkillCandidateSet out;
    const Json* groups = nullptr;
    if (j.is_object() && j.contains("groups") && j.at("groups").is_array()) {
        groups = &j.at("groups");
    } else if (j.is_object() && j.contains("suggest_skills") && j.at("suggest_skills").is_array()) {
        groups = &j.at("suggest_skills");  // provider-facing field name
    } else if (j.is_array()) {
        groups = &j;
    } else {
        report.add(base, "wrong_type", "expected candidate-set object or group array");
        return out;
    }
    size_t gi = 0;
    for (const auto& jg : *groups) {
        const std::string gb = base + ".groups[" + std::to_string(gi) + "]";
        SkillGroup g;
        if (!jg.is_object()) {
            report.add(gb, "wrong_type", "expected object");
            ++gi;
            continue;
        }
        g.meta_skill = opt_string(jg, "meta_skill");
        if (jg.contains("atomic_skills") && jg.at("atomic_skills").is_array()) {
            size_t ai = 0;
            for (const auto& ja : jg.at("atomic_skills")) {
                const std::string ab = gb + ".atomic_skills[" + std::to_string(ai) + "]";
                if (!ja.is_object()) {
                    report.add(ab, "wrong_type", "expected object");
                    ++ai;
                    continue;
                }
                AtomicSkill a;
                auto id = ja.contains("skill_id") ? parse_id(ja.at("skill_id")) : std::nullopt;
                if (!id) {
                    report.add(ab + ".skill_id", "invalid_id");
                    ++ai;
                    continue;
                }
                a.skill_id = *id;
                a.skill_name = opt_string(ja, "skill_name");
                a.skill_description = opt_string(ja, "skill_description");
                a.when_to_use = opt_string(ja, "when_to_use");
                a.trigger = opt_string(ja, "trigger");
                if (ja.contains("parent_ids")) {
                    auto pids = parse_id_list(ja.at("parent_ids"));
                    if (pids) a.parent_ids = *pids;
                }
                auto sect = therapy_from_string(opt_string(ja, "sect"));
                if (!sect) {
                    report.add(ab + ".sect", "unknown_therapy_label", opt_string(ja, "sect"));
                    ++ai;
                    continue;
                }
                a.sect = *sect;
                g.atomic_skills.push_back(std::move(a));
                ++ai;
            }
        } else {
            report.add(gb + ".atomic_skills", "missing_key");
        }
        out.total += static_cast<int>(g.atomic_skills.size());
        out.groups.push_back(std::move(g));
        ++gi;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Library
// ---------------------------------------------------------------------------

const MetaSkill* SkillLibrary::find_meta(Therapy sect, int id) const {
    auto it = meta_index_.find({static_cast<int>(sect), id});
    return it == meta_index_.end() ? nullptr : &metas_[it->second];
}

const AtomicSkill* SkillLibrary::find_atomic(Therapy sect, int id) const {
    auto it = atomic_index_.find({static_cast<int>(sect), id});
    return it == atomic_index_.end() ? nullptr : &atomics_[it->second];
}

std::vector<const AtomicSkill*> SkillLibrary::atomics_under(const MetaSkill& meta) const {
    std::vector<const AtomicSkill*> out;
    for (const auto& a : atomics_) {
        if (a.sect != meta.sect) continue;
        // Lineage of an atomic ends with its own id; every other entry is a meta.
        for (size_t i = 0; i + 1 < a.parent_ids.size(); ++i) {
            if (a.parent_ids[i] == meta.skill_id) {
                out.push_back(&a);
                break;
            }
        }
    }
    return out;
}

std::map<std::string, std::pair<size_t, size_t>> SkillLibrary::counts_per_therapy() const {
    std::map<std::string, std::pair<size_t, size_t>> out;
    for (const auto& m : metas_) out[to_string(m.sect)].first++;
    for (const auto& a : atomics_) out[to_string(a.sect)].second++;
    return out;
}

struct SkillLibraryLoader {
    TaxonomyLoadResult run(const std::string& meta_jsonl, const std::string& atomic_jsonl) {
        TaxonomyLoadResult result;
        auto& lib = result.library;
        auto& report = result.report;

        size_t line_no = 0;
        std::istringstream meta_in(meta_jsonl);
        std::string line;
        while (std::getline(meta_in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            const std::string base = "meta[" + std::to_string(line_no) + "]";
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                report.add(base, "malformed_json");
                continue;
            }
            MetaSkill m;
            auto id = j.contains("skill_id") ? parse_id(j.at("skill_id")) : std::nullopt;
            auto sect = therapy_from_string(opt_string(j, "sect"));
            if (!id) {
                report.add(base + ".skill_id", "invalid_id");
                continue;
            }
            if (!sect || *sect == Therapy::integrative) {
                report.add(base + ".sect", "unknown_therapy_label", opt_string(j, "sect"));
                continue;
            }
            m.skill_id = *id;
            m.sect = *sect;
            m.skill_name = opt_string(j, "skill_name");
            m.skill_description = opt_string(j, "skill_description");
            if (j.contains("parent_ids")) {
                auto pids = parse_id_list(j.at("parent_ids"));
                if (!pids) {
                    report.add(base + ".parent_ids", "wrong_type");
                    continue;
                }
                m.parent_ids = *pids;
            }
            // Accept both self-terminated and ancestor-only lineages; normalize
            // to self-terminated.
            if (m.parent_ids.empty() || m.parent_ids.back() != m.skill_id)
                m.parent_ids.push_back(m.skill_id);
            if (j.contains("stage_tags") && j.at("stage_tags").is_array()) {
                m.stage_tags.clear();
                for (const auto& e : j.at("stage_tags")) {
                    auto s = parse_id(e);
                    if (s && *s >= 1 && *s <= 3) m.stage_tags.insert(*s);
                }
                if (m.stage_tags.empty()) m.stage_tags = {1, 2, 3};
            }
            const auto key = std::make_pair(static_cast<int>(m.sect), m.skill_id);
            if (lib.meta_index_.count(key)) {
                report.add(base, "duplicate_id",
                           to_string(m.sect) + "/" + std::to_string(m.skill_id));
                continue;
            }
            lib.meta_index_[key] = lib.metas_.size();
            lib.metas_.push_back(std::move(m));
        }

        // Ancestor existence + cycle checks over the meta layer.
        for (const auto& m : lib.metas_) {
            std::unordered_set<int> seen;
            for (size_t i = 0; i + 1 < m.parent_ids.size(); ++i) {
                const int pid = m.parent_ids[i];
                if (!lib.find_meta(m.sect, pid))
                    report.add("meta " + to_string(m.sect) + "/" + std::to_string(m.skill_id),
                               "dangling_parent", std::to_string(pid));
                if (!seen.insert(pid).second || pid == m.skill_id)
                    report.add("meta " + to_string(m.sect) + "/" + std::to_string(m.skill_id),
                               "cycle_detected", std::to_string(pid));
            }
        }
        // Immediate-parent chains must reach a root without revisiting a node.
        for (const auto& m : lib.metas_) {
            std::unordered_set<int> visited{m.skill_id};
            const MetaSkill* node = &m;
            while (node->parent_ids.size() >= 2) {
                const int pid = node->parent_ids[node->parent_ids.size() - 2];
                const MetaSkill* parent = lib.find_meta(node->sect, pid);
                if (!parent) break;  // dangling_parent already reported
                if (!visited.insert(pid).second) {
                    report.add("meta " + to_string(m.sect) + "/" + std::to_string(m.skill_id),
                               "cycle_detected", "parent chain revisits " + std::to_string(pid));
                    break;
                }
                node = parent;
            }
        }

        line_no = 0;
        std::istringstream atomic_in(atomic_jsonl);
        while (std::getline(atomic_in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            const std::string base = "atomic[" + std::to_string(line_no) + "]";
            Json j = Json::parse(line, nullptr, false);
            if (j.is_discarded()) {
                report.add(base, "malformed_json");
                continue;
            }
            AtomicSkill a;
            auto id = j.contains("skill_id") ? parse_id(j.at("skill_id")) : std::nullopt;
            auto sect = therapy_from_string(opt_string(j, "sect"));
            if (!id) {
                report.add(base + ".skill_id", "invalid_id");
                continue;
            }
            if (!sect || *sect == Therapy::integrative) {
                report.add(base + ".sect", "unknown_therapy_label", opt_string(j, "sect"));
                continue;
            }
            a.skill_id = *id;
            a.sect = *sect;
            a.skill_name = opt_string(j, "skill_name");
            a.skill_description = opt_string(j, "skill_description");
            a.when_to_use = opt_string(j, "when_to_use");
            a.trigger = opt_string(j, "trigger");
            if (j.contains("parent_ids")) {
                auto pids = parse_id_list(j.at("parent_ids"));
                if (!pids) {
                    report.add(base + ".parent_ids", "wrong_type");
                    continue;
                }
                a.parent_ids = *pids;
            }
            if (a.parent_ids.empty() || a.parent_ids.back() != a.skill_id)
                a.parent_ids.push_back(a.skill_id);
            for (size_t i = 0; i + 1 < a.parent_ids.size(); ++i) {
                if (!lib.find_meta(a.sect, a.parent_ids[i]))
                    report.add(base, "dangling_parent", std::to_string(a.parent_ids[i]));
            }
            const auto key = std::make_pair(static_cast<int>(a.sect), a.skill_id);
            if (lib.atomic_index_.count(key)) {
                report.add(base, "duplicate_id",
                           to_string(a.sect) + "/" + std::to_string(a.skill_id));
                continue;
            }
            lib.atomic_index_[key] = lib.atomics_.size();
            lib.atomics_.push_back(std::move(a));
        }
        return result;
    }
};

TaxonomyLoadResult load_taxonomy(const std::string& meta_jsonl, const std::string& atomic_jsonl) {
    return SkillLibraryLoader{}.run(meta_jsonl, atomic_jsonl);
}

TaxonomyLoadResult load_taxonomy_files(const std::string& meta_path,
                                       const std::string& atomic_path) {
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    return load_taxonomy(slurp(meta_path), slurp(atomic_path));
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

std::vector<MetaSkill> coarse_filter(const SkillLibrary& lib, const std::vector<Therapy>& therapies,
                                     int stage) {
    if (therapies.empty()) throw std::invalid_argument("coarse_filter: empty therapy set");
    std::vector<MetaSkill> out;
    for (const auto& m : lib.metas()) {
        if (!m.stage_tags.count(stage)) continue;
        for (Therapy t : therapies) {
            if (m.sect == t) {
                out.push_back(m);
                break;
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const MetaSkill& a, const MetaSkill& b) {
        if (a.sect != b.sect) return to_string(a.sect) < to_string(b.sect);
        return a.skill_id < b.skill_id;
    });
    return out;
}

SkillCandidateSet fallback_select(const SkillLibrary& lib, const std::vector<MetaSkill>& coarse,
                                  const std::vector<std::string>& objectives, int k) {
    std::string goal_text;
    for (const auto& o : objectives) goal_text += o + "\n";
    const auto goal_grams = text::char_bigrams(goal_text);

    struct Scored {
        const AtomicSkill* skill;
        const MetaSkill* meta;
        double score;
    };
    std::vector<Scored> scored;
    std::unordered_set<const AtomicSkill*> taken;
    for (const auto& m : coarse) {
        for (const AtomicSkill* a : lib.atomics_under(m)) {
            if (!taken.insert(a).second) continue;
            const auto grams = text::char_bigrams(a->when_to_use + a->trigger);
            size_t inter = 0;
            for (const auto& g : grams) inter += goal_grams.count(g);
            const double score = grams.empty() ? 0.0
                                               : static_cast<double>(inter) /
                                                     static_cast<double>(grams.size());
            scored.push_back({a, &m, score});
        }
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        if (x.score != y.score) return x.score > y.score;
        if (x.skill->sect != y.skill->sect)
            return to_string(x.skill->sect) < to_string(y.skill->sect);
        return x.skill->skill_id < y.skill->skill_id;
    });
    if (scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));

    // Keep the nested grouping: one group per contributing meta, in coarse order.
    SkillCandidateSet set;
    for (const auto& m : coarse) {
        SkillGroup g;
        g.meta_skill = m.skill_name + ":" + m.skill_description;
        for (const auto& s : scored)
            if (s.meta == &m) g.atomic_skills.push_back(*s.skill);
        if (!g.atomic_skills.empty()) {
            set.total += static_cast<int>(g.atomic_skills.size());
            set.groups.push_back(std::move(g));
        }
    }
    return set;
}

ValidationReport verify_candidate_set(const SkillCandidateSet& set, const SkillLibrary& lib, int k) {
    ValidationReport report;
    if (set.total > k)
        report.add("$.total", "candidate_set_too_large",
                   std::to_string(set.total) + " > " + std::to_string(k));
    int counted = 0;
    size_t gi = 0;
    for (const auto& g : set.groups) {
        size_t ai = 0;
        for (const auto& a : g.atomic_skills) {
            const std::string path = "$.groups[" + std::to_string(gi) + "].atomic_skills[" +
                                     std::to_string(ai) + "]";
            const AtomicSkill* stored = lib.find_atomic(a.sect, a.skill_id);
            if (!stored) {
                report.add(path, "unknown_skill",
                           to_string(a.sect) + "/" + std::to_string(a.skill_id));
            } else if (stored->skill_name != a.skill_name ||
                       stored->skill_description != a.skill_description) {
                report.add(path, "skill_altered", std::to_string(a.skill_id));
            }
            ++counted;
            ++ai;
        }
        ++gi;
    }
    if (counted != set.total)
        report.add("$.total", "total_mismatch",
                   std::to_string(counted) + " skills vs declared " + std::to_string(set.total));
    return report;
}

std::variant<const AtomicSkill*, SkillRefError> resolve_skill_ref(const SkillCandidateSet& set,
                                                                  const SkillRef& ref) {
    const AtomicSkill* skill = set.find(ref.skill_id);
    if (!skill) return SkillRefError{SkillRefErrorKind::unknown_id, "", ref.description};
    const std::string cited = text::normalize_for_match(ref.description);
    if (cited == text::normalize_for_match(skill->skill_description) ||
        cited == text::normalize_for_match(skill->skill_name))
        return skill;
    return SkillRefError{SkillRefErrorKind::description_drift, skill->skill_description,
                         ref.description};
}

}  // namespace counselforge
