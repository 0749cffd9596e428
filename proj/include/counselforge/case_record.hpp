#pragma once

#include "counselforge/jsonio.hpp"
#include "counselforge/plan.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/summary.hpp"
#include "counselforge/transcript.hpp"
#include "counselforge/validation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace counselforge {

struct DialogueFeature {
    int dialogue_number = 0;
    std::string context;
    std::string dialogue_content;
    std::string learning;
};

struct SessionEntry {
    SessionTranscript transcript;
    SessionSummary summary;
    ClientProfile unlocked_after;
};

struct CaseRecord {
    std::string case_id;
    Therapy therapy = Therapy::cbt;
    ClientProfile client_info;  // ground truth
    TherapeuticPlan global_plan;
    std::vector<DialogueFeature> dialogue_features;
    std::vector<SessionEntry> sessions;
};

Json to_json(const DialogueFeature& f);
Json to_json(const CaseRecord& r);

// Total parse: either a fully validated record or a report listing every
// violation; never partial state.
struct CaseParseResult {
    std::optional<CaseRecord> record;
    ValidationReport report;
    bool ok() const { return record.has_value(); }
};

CaseParseResult parse_case_record(const std::string& raw_json);
CaseParseResult parse_case_record(const Json& j);

}  // namespace counselforge
