#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/validation.hpp"

#include <string>
#include <vector>

namespace counselforge {

struct GoalAssessment {
    std::string objective_recap;
    std::string completion_status;
    std::string evidence_and_analysis;

    bool operator==(const GoalAssessment&) const = default;
};

struct ClientStateAnalysis {
    std::string affective_state;
    std::string behavioral_patterns;
    std::string therapeutic_alliance;
    std::string unresolved_points_or_tensions;
    // Therapy-specific fields; empty for therapies absent from theory_select.
    std::string cognitive_patterns;          // cbt
    std::string subconscious_manifestation;  // pdt
    std::string personal_agency;             // pmt
    std::string existentialism_topic;        // het
    std::string target_behavior;             // bt

    bool operator==(const ClientStateAnalysis&) const = default;
};

struct SessionSummary {
    std::string session_summary_abstract;
    GoalAssessment goal_assessment;
    ClientStateAnalysis client_state_analysis;
    std::vector<std::string> homework;

    bool operator==(const SessionSummary&) const = default;
};

// The four admissible completion statuses.
const std::vector<std::string>& completion_status_labels();

Json to_json(const SessionSummary& s);
SessionSummary parse_summary(const Json& j, ValidationReport& report, const std::string& base = "$");

// Structural gating: therapy-specific analysis fields must be empty for
// non-selected therapies, and every status mention inside completion_status
// must come from the enumerated labels.
ValidationReport validate_summary(const SessionSummary& s, const std::vector<Therapy>& theory_select);

}  // namespace counselforge
