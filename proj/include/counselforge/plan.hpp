#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/validation.hpp"

#include <string>
#include <vector>

namespace counselforge {

struct SessionPlanContent {
    int session_index = 0;
    std::vector<Therapy> theory_select;  // never integrative
    std::string theme;
    std::vector<std::string> persona_links;  // flattened key paths, "cbt.core_beliefs: …"
    std::vector<std::string> case_material;
    std::vector<std::string> rationale;
};

struct PlanStage {
    int stage_number = 0;
    std::string stage_name;
    std::string sessions;  // range text, e.g. "第1–第2次"
    std::vector<SessionPlanContent> content;
};

struct TherapeuticPlan {
    std::vector<PlanStage> stages;  // exactly 3

    int total_sessions() const;
    const SessionPlanContent* entry(int session_index) const;
    int stage_of_session(int session_index) const;  // 0 when out of range
};

Json to_json(const TherapeuticPlan& p);
TherapeuticPlan parse_plan(const Json& j, ValidationReport& report, const std::string& base = "$");

// Checks plan-level invariants that need the ground-truth profile: every
// selected therapy's block nonempty, five fields populated. Also emits
// advisory "missing_bridge_task" warnings when a session introduces a new
// profile area without a foreshadowing item in the previous session.
ValidationReport lint_plan(const TherapeuticPlan& p, const ClientProfile& ground_truth);

}  // namespace counselforge
