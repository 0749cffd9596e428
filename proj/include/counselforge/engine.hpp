#pragma once

#include "counselforge/case_record.hpp"
#include "counselforge/gateway.hpp"
#include "counselforge/memory_ledger.hpp"
#include "counselforge/plan.hpp"
#include "counselforge/skills.hpp"

#include <memory>
#include <string>
#include <vector>

namespace counselforge {

// Everything the counselor role may legitimately know before a session.
struct CounselorView {
    ClientProfile unlocked_client_info;
    std::vector<SessionSummary> history_summaries;
    SkillCandidateSet suggested_skills;
    SessionGoals goals;
};

struct SessionOutcome {
    int session_number = 0;
    SessionTranscript transcript;
    ClientProfile extracted;  // session delta (client_info_get)
    ClientProfile merged;     // new unlocked state
    SessionSummary summary;
    std::vector<MergeDecision> merge_decisions;
    ValidationReport validation;  // advisory flags (turn count etc.)
};

struct CaseSeed {
    std::string case_id;
    Therapy therapy = Therapy::cbt;
    ClientProfile client_info;
    TherapeuticPlan global_plan;
    std::vector<DialogueFeature> dialogue_features;
};

CaseSeed parse_case_seed(const Json& j, ValidationReport& report);
Json to_json(const CaseSeed& seed);

struct EngineConfig {
    TranscriptBounds bounds;
    int k_skills = 60;
    int history_tail_utterances = 6;
    bool fine_select_fallback = true;
    int max_retries = 3;
    // Session-1 objectives must include an intake item; detected by keyword.
    std::vector<std::string> intake_keywords = {"基本信息", "基础信息", "姓名", "主诉", "背景"};
    MemoryConfig memory;
};

// Provider-assisted atomic-skill selection with the integrity gate; falls
// back to ranked lexical overlap once retries are exhausted (when enabled).
SkillCandidateSet fine_select(const SkillLibrary& lib, const std::vector<MetaSkill>& coarse,
                              const SessionGoals& goals, const Gateway& gateway, int k,
                              bool fallback_enabled = true);

// Structural firewall over an assembled dialogue-generation request: the
// ground-truth profile must appear exactly once, under the client-role
// variable, and no other variable may carry a ground-truth-only leaf value.
// Throws CfError(firewall_violation) on an engine-side assembly bug.
void check_request_firewall(const std::map<std::string, Json>& variables,
                            const ClientProfile& ground_truth, const ClientProfile& unlocked);

// Atomic per-session persistence: artifacts staged into a temp directory and
// renamed into place; the manifest is updated last. A crash between phases
// leaves the store at the previous session boundary.
class CaseStore {
  public:
    explicit CaseStore(std::string root_dir);

    void persist_session(const std::string& case_id, const SessionOutcome& outcome, int plan_total);
    void persist_case(const CaseRecord& record);
    Json read_manifest(const std::string& case_id) const;

    const std::string& root() const { return root_; }

  private:
    std::string root_;
};

class SessionEngine {
  public:
    SessionEngine(const SkillLibrary& lib, std::shared_ptr<Gateway> gateway, EngineConfig config);

    SessionGoals build_session_goals(const SessionPlanContent& entry, const CounselorView& view,
                                     int session_number) const;

    SessionTranscript generate_dialogue(const CounselorView& view, const ClientProfile& ground_truth,
                                        const std::vector<DialogueFeature>& features,
                                        const std::vector<Utterance>& history_tail,
                                        const std::vector<Therapy>& theory_select,
                                        int session_number, int stage = 1) const;

    SessionOutcome run_session(const CaseSeed& seed, const std::vector<SessionOutcome>& prior,
                               int session_number) const;

    CaseRecord run_case(const CaseSeed& seed, CaseStore* store = nullptr) const;

    // View for session n is a pure function of the plan entry and outcomes 1..n-1.
    CounselorView build_view(const std::vector<SessionOutcome>& prior) const;

    const EngineConfig& config() const { return config_; }

  private:
    const SkillLibrary& lib_;
    std::shared_ptr<Gateway> gateway_;
    EngineConfig config_;
};

}  // namespace counselforge
