#pragma once

#include "counselforge/engine.hpp"
#include "counselforge/gateway.hpp"
#include "counselforge/profile.hpp"
#include "counselforge/skills.hpp"

#include <memory>
#include <string>

namespace cftest {

using namespace counselforge;

// A full ground-truth profile with every therapy block populated. The extra
// growth item is appended verbatim (never revealed by the mock dialogue when
// it sits past the plan length); used as a leakage sentinel.
ClientProfile fixture_profile(const std::string& extra_growth_item = "");

// Five-session, three-stage plan over the fixture profile.
TherapeuticPlan fixture_plan();

std::vector<DialogueFeature> fixture_features();

CaseSeed fixture_seed(const std::string& case_id = "case-001",
                      const std::string& sentinel = "");

// Small taxonomy: per therapy, one root meta plus three stage-tagged metas and
// six atomics. Loads through the real JSONL loader.
TaxonomyLoadResult fixture_taxonomy();

std::string fixture_meta_jsonl();
std::string fixture_atomic_jsonl();

// Repo config/templates directory (COUNSELFORGE_ROOT env or ./config).
TemplateRegistry load_repo_templates();

std::string repo_config_dir();

MemoryConfig load_repo_memory_config();

struct MockOptions {
    size_t dialogue_turns = 22;  // counselor+client pairs before the closing line
    int skill_pick = 6;          // atomics kept by the skill-suggestion mock
};

// Deterministic stand-in for the generator and judge: answers every template
// from the request variables alone, so the same request always gets the same
// response and record/replay round-trips exactly.
std::shared_ptr<ScriptedProvider> make_mock_provider(MockOptions options = {});

std::string mock_response(const RenderedRequest& req, const MockOptions& options);

EngineConfig fixture_engine_config();

}  // namespace cftest
