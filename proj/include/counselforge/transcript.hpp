#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/skills.hpp"
#include "counselforge/think.hpp"
#include "counselforge/validation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace counselforge {

enum class Role { counselor, client };

std::string to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);

struct Utterance {
    Role role = Role::counselor;
    std::string text;  // raw text; counselor text carries the leading think block

    // Derived at parse time, not serialized.
    std::optional<ThinkTrace> think;
    std::string spoken_text;
    std::optional<ThinkError> think_error;
};

struct SessionGoals {
    std::string overall_stage;
    std::string stage_title;
    std::vector<std::string> objective;

    bool operator==(const SessionGoals&) const = default;
};

Json to_json(const SessionGoals& g);
SessionGoals parse_session_goals(const Json& j, ValidationReport& report,
                                 const std::string& base = "$");

struct SessionTranscript {
    int session_number = 0;
    std::vector<Therapy> theory_select;
    SessionGoals goals;
    SkillCandidateSet suggested_skills;
    std::vector<Utterance> utterances;

    // Number of counselor+client adjacent pairs; a trailing unpaired counselor
    // closing does not count.
    size_t turn_count() const;
};

struct TranscriptBounds {
    size_t min_turns = 22;
    size_t max_turns = 70;
};

Json to_json(const SessionTranscript& t);
SessionTranscript parse_transcript(const Json& j, ValidationReport& report,
                                   const std::string& base = "$");

// Utterance-list-only view, the provider-facing "dialogue" array.
Json dialogue_to_json(const std::vector<Utterance>& utterances);
std::vector<Utterance> parse_dialogue(const Json& j, ValidationReport& report,
                                      const std::string& base = "$");

// Pure structural check. Turn-count violations carry rule "turn_count" and are
// advisory (flag, don't reject); everything else is a hard violation.
ValidationReport validate_transcript(const SessionTranscript& t, const TranscriptBounds& bounds);

bool is_hard_violation(const Violation& v);

}  // namespace counselforge
