#pragma once

#include "counselforge/gateway.hpp"
#include "counselforge/plan.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/summary.hpp"
#include "counselforge/transcript.hpp"

#include <map>
#include <string>
#include <vector>

namespace counselforge {

struct ExtractionDelta {
    ClientProfile client_info_get;
};

enum class MergeAction { keep_history, take_current, fuse, drop_conflict, truncate };

std::string to_string(MergeAction a);

struct MergeDecision {
    std::string path;
    MergeAction action = MergeAction::keep_history;
    std::string rationale_tag;
};

Json to_json(const MergeDecision& d);

struct MemoryConfig {
    // Fact-Expectation firewall: items carrying any of these markers are
    // treated as plans/wishes, not facts. Stopgap list, flagged in audit.
    std::vector<std::string> future_markers = {"打算", "计划", "希望能", "想要去", "以后会",
                                               "将来", "未来会", "准备去", "下周会", "下个月会"};
    double dedup_threshold = 0.6;            // bigram jaccard for "same item"
    double homework_match_containment = 0.6; // reality-therapy + provenance matching
    int homework_window_utterances = 0;      // 0 = final contiguous counselor segment
    std::map<std::string, std::string> defense_definitions;  // mechanism -> standard definition
    std::map<std::string, std::string> contact_definitions;  // mode -> standard definition
};

// Deterministic post-filters applied to a provider extraction: the
// Reality-Therapy firewall (homework phrasing from prior summaries), the
// Fact-Expectation firewall (future-tense markers), session-1-only gating and
// therapy gating. Stripped items are reported in `audit`.
ExtractionDelta apply_extraction_firewalls(ExtractionDelta delta,
                                           const std::vector<Therapy>& theory_select,
                                           int session_number,
                                           const std::vector<std::string>& prior_homework,
                                           const MemoryConfig& config,
                                           ValidationReport* audit = nullptr);

ExtractionDelta extract_session_info(const SessionTranscript& transcript,
                                     const std::vector<Therapy>& theory_select, int session_number,
                                     const Gateway& gateway,
                                     const std::vector<std::string>& prior_homework,
                                     const MemoryConfig& config, ValidationReport* audit = nullptr);

struct MergeResult {
    ClientProfile merged;
    std::vector<MergeDecision> decisions;
};

// The engine-deterministic merge layer. Whatever the provider proposed, the
// output satisfies: therapy gating (non-selected blocks byte-equal history),
// scalar precedence, the name rule, all list caps, no-leakage of global-only
// content, and a frozen key structure. Every changed leaf carries exactly one
// decision; every vanished history item carries a drop/truncate/fuse record.
MergeResult enforce_merge_rules(const ClientProfile& provider_merged, const ClientProfile& history,
                                const ExtractionDelta& current, const ClientProfile& global_truth,
                                const std::vector<Therapy>& theory_select,
                                const MemoryConfig& config);

MergeResult merge_profiles(const ClientProfile& history, const ExtractionDelta& current,
                           const ClientProfile& global_truth,
                           const std::vector<Therapy>& theory_select, const Gateway& gateway,
                           const MemoryConfig& config);

// Name rule: keep current's variant when it shares the family-name character
// with the global name or is the global name with an affective prefix (小/老)
// or an honorific suffix; otherwise history's.
bool name_matches_global(const std::string& current_name, const std::string& global_name);

// progress priority: 已解决 > 待解决 > 未提及 > anything else.
int progress_priority(const std::string& progress);

// Final contiguous counselor utterances (or the last k utterances when
// configured), joined: the only admissible source for homework.
std::string homework_window_text(const SessionTranscript& transcript, const MemoryConfig& config);

ValidationReport check_homework_provenance(const SessionSummary& summary,
                                           const SessionTranscript& transcript,
                                           const MemoryConfig& config);

SessionSummary summarize_session(const SessionTranscript& transcript,
                                 const ClientProfile& unlocked,
                                 const std::vector<SessionSummary>& history_summaries,
                                 const SessionGoals& goals, const TherapeuticPlan& plan,
                                 const std::vector<Therapy>& theory_select, const Gateway& gateway,
                                 const MemoryConfig& config);

}  // namespace counselforge
