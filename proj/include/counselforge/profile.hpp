#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/validation.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace counselforge {

enum class Therapy { cbt, pdt, het, pmt, bt, integrative };

constexpr std::array<Therapy, 5> kProfileTherapies = {Therapy::cbt, Therapy::pdt, Therapy::het,
                                                      Therapy::pmt, Therapy::bt};

std::string to_string(Therapy t);
std::optional<Therapy> therapy_from_string(std::string_view s);

// The nine topic labels a profile may carry. Empty string is also accepted
// (topic unknown / not yet revealed).
const std::vector<std::string>& topic_labels();
bool is_known_topic(std::string_view topic);

// The fifteen cognitive-pattern labels used by CBT special situations.
const std::vector<std::string>& cognitive_pattern_labels();
bool is_known_cognitive_pattern(std::string_view p);

struct StaticTraits {
    std::string age;
    std::string name;
    std::string gender;
    std::string occupation;
    std::string educational_background;
    std::string marital_status;
    std::string family_status;
    std::string social_status;
    std::string medical_history;
    std::string language_features;

    bool operator==(const StaticTraits&) const = default;
};

struct BasicInfo {
    StaticTraits static_traits;
    std::string main_problem;
    std::string topic;
    std::string core_demands;
    std::vector<std::string> growth_experiences;

    bool operator==(const BasicInfo&) const = default;
};

struct SpecialSituation {
    std::string event;
    std::string conditional_assumptions;
    std::string compensatory_strategies;
    std::string automatic_thoughts;
    std::string cognitive_pattern;
    // Counselor-view-only fields, absent from ground-truth profiles.
    std::optional<std::string> progress;
    std::optional<std::vector<std::string>> analysis;

    bool operator==(const SpecialSituation&) const = default;
};

struct CbtParams {
    std::vector<std::string> core_beliefs;
    std::vector<SpecialSituation> special_situations;

    bool empty() const { return core_beliefs.empty() && special_situations.empty(); }
    bool operator==(const CbtParams&) const = default;
};

struct CoreConflict {
    std::string wish;
    std::string fear;
    std::vector<std::string> defense_goal;

    bool operator==(const CoreConflict&) const = default;
};

struct ObjectRelation {
    std::string self_representation;
    std::string object_representation;
    std::string linking_affect;

    bool operator==(const ObjectRelation&) const = default;
};

struct BehavioralResponsePattern {
    std::string trigger_condition;
    std::string interpretation;
    std::string defense_mechanism;
    std::string defense_definition;
    std::string response_instruction;

    bool operator==(const BehavioralResponsePattern&) const = default;
};

struct PdtParams {
    CoreConflict core_conflict;
    std::vector<ObjectRelation> object_relations;
    std::vector<BehavioralResponsePattern> behavioral_response_patterns;

    bool empty() const {
        return core_conflict.wish.empty() && core_conflict.fear.empty() &&
               core_conflict.defense_goal.empty() && object_relations.empty() &&
               behavioral_response_patterns.empty();
    }
    bool operator==(const PdtParams&) const = default;
};

struct ExistentialTopic {
    std::string theme;
    std::vector<std::string> manifestations;
    std::vector<std::string> outcomes;

    bool operator==(const ExistentialTopic&) const = default;
};

struct ContactMode {
    std::string mode;
    std::string definition;
    std::vector<std::string> manifestations;

    bool operator==(const ContactMode&) const = default;
};

struct HetParams {
    std::vector<ExistentialTopic> existentialism_topic;
    std::vector<ContactMode> contact_model;

    bool empty() const { return existentialism_topic.empty() && contact_model.empty(); }
    bool operator==(const HetParams&) const = default;
};

struct ExceptionEvent {
    std::string target_problem;
    std::string unique_outcome;
    std::string reason;

    bool operator==(const ExceptionEvent&) const = default;
};

struct ForceField {
    std::vector<std::string> positive_force;
    std::vector<std::string> negative_force;

    bool operator==(const ForceField&) const = default;
};

struct PmtParams {
    std::vector<ExceptionEvent> exception_events;
    ForceField force_field;

    bool empty() const {
        return exception_events.empty() && force_field.positive_force.empty() &&
               force_field.negative_force.empty();
    }
    bool operator==(const PmtParams&) const = default;
};

struct TargetBehavior {
    std::string behavior;
    std::string core_reason;
    std::string function;
    std::string consequence;
    std::vector<std::string> antecedent;

    bool operator==(const TargetBehavior&) const = default;
};

struct BtParams {
    std::vector<TargetBehavior> target_behavior;

    bool empty() const { return target_behavior.empty(); }
    bool operator==(const BtParams&) const = default;
};

// Full client profile. The structure is fixed: all five therapy blocks exist
// on every profile, unused ones hold empty strings/lists.
struct ClientProfile {
    BasicInfo basic_info;
    CbtParams cbt;
    PdtParams pdt;
    HetParams het;
    PmtParams pmt;
    BtParams bt;

    bool theory_block_empty(Therapy t) const;
    bool operator==(const ClientProfile&) const = default;

    // All keys present, all values empty: the counselor's day-zero notes.
    static ClientProfile empty_structured();
};

Json to_json(const StaticTraits& t);
Json to_json(const ClientProfile& p);

// Collecting parser: appends one violation per broken rule under `base` and
// returns a best-effort value. Callers treat the result as valid only when no
// violations were appended.
ClientProfile parse_profile(const Json& j, ValidationReport& report, const std::string& base = "$");

// Every string leaf of the profile, paired with its path. Used by firewall and
// merge machinery.
std::vector<std::pair<std::string, std::string>> profile_leaves(const ClientProfile& p,
                                                                const std::string& base = "");

}  // namespace counselforge
