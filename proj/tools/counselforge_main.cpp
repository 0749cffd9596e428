#include "counselforge/corpus.hpp"
#include "counselforge/engine.hpp"
#include "counselforge/errors.hpp"
#include "counselforge/eval.hpp"
#include "counselforge/gateway.hpp"
#include "counselforge/skills.hpp"
#include "counselforge/text.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace cf = counselforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

void emit(const cf::Json& j) { std::cout << cf::pretty_json(j) << std::endl; }

std::string default_config_dir() {
    if (const char* root = std::getenv("COUNSELFORGE_ROOT"))
        return std::string(root) + "/config";
    return "config";
}

cf::MemoryConfig load_memory_config(const std::string& config_dir) {
    cf::MemoryConfig cfg;
    auto load_map = [](const std::string& path) {
        std::map<std::string, std::string> out;
        std::ifstream in(path, std::ios::binary);
        if (!in) return out;
        cf::Json j = cf::Json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return out;
        for (const auto& [k, v] : j.items())
            if (v.is_string()) out[cf::text::normalize_for_match(k)] = v.get<std::string>();
        return out;
    };
    cfg.defense_definitions = load_map(config_dir + "/defense_definitions.json");
    cfg.contact_definitions = load_map(config_dir + "/contact_modes.json");
    return cfg;
}

std::shared_ptr<cf::ChatProvider> make_provider(const std::string& slot,
                                                const std::string& replay_path,
                                                const std::string& record_path) {
    std::shared_ptr<cf::ChatProvider> provider;
    if (!replay_path.empty())
        provider = cf::ReplayProvider::from_file(replay_path);
    else
        provider = cf::HttpProvider::from_env(slot);
    if (!record_path.empty())
        provider = std::make_shared<cf::RecordingProvider>(provider, record_path);
    return provider;
}

cf::CorpusLoadOptions load_options(const std::string& aliases_path) {
    cf::CorpusLoadOptions options;
    if (aliases_path.empty()) return options;
    std::ifstream in(aliases_path, std::ios::binary);
    if (!in) throw cf::CfError(cf::errkind::io_error, "cannot open alias map " + aliases_path);
    cf::Json j = cf::Json::parse(in);
    for (const auto& [from, to] : j.items())
        if (to.is_string()) options.field_aliases[from] = to.get<std::string>();
    return options;
}

int run_validate(const std::string& corpus_path, const std::string& aliases_path) {
    cf::Corpus corpus = cf::load_corpus_file(corpus_path, load_options(aliases_path));
    cf::Json out;
    out["valid_cases"] = corpus.cases.size();
    out["errors"] = corpus.errors.to_json();
    emit(out);
    return corpus.errors.ok() ? kExitOk : kExitFindings;
}

int run_stats(const std::string& corpus_path, const std::string& meta_path,
              const std::string& atomic_path, const std::string& aliases_path) {
    cf::Corpus corpus = cf::load_corpus_file(corpus_path, load_options(aliases_path));
    std::optional<cf::TaxonomyLoadResult> taxonomy;
    if (!meta_path.empty() && !atomic_path.empty()) {
        taxonomy = cf::load_taxonomy_files(meta_path, atomic_path);
        if (!taxonomy->ok()) {
            std::cerr << "taxonomy errors: " << taxonomy->report.summary() << "\n";
            return kExitFindings;
        }
    }
    cf::CorpusStats stats =
        cf::compute_stats(corpus, taxonomy ? &taxonomy->library : nullptr);
    emit(cf::to_json(stats));
    return kExitOk;
}

int run_plan_stats(const std::string& corpus_path, const std::string& aliases_path) {
    cf::Corpus corpus = cf::load_corpus_file(corpus_path, load_options(aliases_path));
    emit(cf::to_json(cf::compute_plan_stats(corpus)));
    return kExitOk;
}

int run_generate(const std::string& seed_path, const std::string& out_dir,
                 const std::string& replay_path, const std::string& record_path,
                 const std::string& meta_path, const std::string& atomic_path, int max_cases,
                 int jobs, size_t min_turns, size_t max_turns, int k_skills,
                 const std::string& config_dir) {
    std::ifstream in(seed_path, std::ios::binary);
    if (!in) throw cf::CfError(cf::errkind::io_error, "cannot open seed file " + seed_path);

    cf::TaxonomyLoadResult taxonomy = cf::load_taxonomy_files(meta_path, atomic_path);
    if (!taxonomy.ok())
        throw cf::CfError(cf::errkind::schema_violation,
                          "taxonomy: " + taxonomy.report.summary());

    cf::TemplateRegistry templates;
    templates.load_directory(config_dir + "/templates");
    auto gateway = std::make_shared<cf::Gateway>(
        templates, make_provider("generator", replay_path, record_path));

    cf::EngineConfig config;
    config.memory = load_memory_config(config_dir);
    config.bounds.min_turns = min_turns;
    config.bounds.max_turns = max_turns;
    config.k_skills = k_skills;
    cf::SessionEngine engine(taxonomy.library, gateway, config);
    cf::CaseStore store(out_dir);

    std::vector<cf::CaseSeed> seeds;
    std::string line;
    while (std::getline(in, line)) {
        if (cf::text::trim(line).empty()) continue;
        if (max_cases > 0 && static_cast<int>(seeds.size()) >= max_cases) break;
        cf::Json j = cf::Json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw cf::CfError(cf::errkind::schema_violation, "seed line is not JSON");
        cf::ValidationReport report;
        seeds.push_back(cf::parse_case_seed(j, report));
        if (!report.ok())
            throw cf::CfError(cf::errkind::schema_violation, "seed: " + report.summary());
    }

    // Sessions within a case are strictly sequential; distinct cases may run
    // concurrently. Results are reported in seed order regardless of jobs.
    std::vector<cf::Json> entries(seeds.size());
    std::vector<std::string> failures(seeds.size());
    auto run_one = [&](size_t i) {
        try {
            cf::CaseRecord record = engine.run_case(seeds[i], &store);
            cf::Json entry;
            entry["case_id"] = record.case_id;
            entry["sessions"] = record.sessions.size();
            entry["path"] = store.root() + "/" + record.case_id + "/case.json";
            entries[i] = std::move(entry);
        } catch (const std::exception& e) {
            failures[i] = seeds[i].case_id + ": " + e.what();
        }
    };
    const size_t workers =
        std::min<size_t>(std::max(jobs, 1), std::max<size_t>(seeds.size(), 1));
    if (workers <= 1) {
        for (size_t i = 0; i < seeds.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= seeds.size()) return;
                    run_one(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    for (const auto& failure : failures)
        if (!failure.empty()) throw cf::CfError(cf::errkind::schema_violation, failure);
    cf::Json results = cf::Json::array();
    for (auto& e : entries) results.push_back(std::move(e));
    cf::Json out;
    out["generated"] = std::move(results);
    emit(out);
    return kExitOk;
}

int run_evaluate(const std::string& corpus_path, const std::string& level,
                 const std::string& scope, size_t sample, uint64_t seed,
                 const std::string& out_path, const std::string& replay_path,
                 const std::string& record_path, bool pooled, int parallel,
                 const std::string& config_dir) {
    cf::Corpus corpus = cf::load_corpus_file(corpus_path);
    if (corpus.cases.empty()) throw cf::CfError(cf::errkind::empty_corpus, corpus_path);

    cf::TemplateRegistry templates;
    templates.load_directory(config_dir + "/templates");
    cf::Gateway judge(templates, make_provider("judge", replay_path, record_path));

    cf::EvalOptions options;
    options.counselor_level = level == "counselor" || level == "both";
    options.client_level = level == "client" || level == "both";
    options.shared_scope = scope == "shared" || scope == "both";
    options.specific_scope = scope == "specific" || scope == "both";
    options.pooled_diffs = pooled;
    options.max_parallel = parallel;

    cf::InstrumentRegistry registry = cf::InstrumentRegistry::builtin();
    const std::string override_path = config_dir + "/instruments.json";
    if (std::filesystem::exists(override_path))
        registry = cf::InstrumentRegistry::with_overrides(override_path);

    cf::CorpusEvaluation eval =
        cf::evaluate_corpus(corpus.cases, judge, registry, sample, seed, options);
    const cf::Json out = cf::to_json(eval);
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
        f << cf::pretty_json(out) << "\n";
    }
    emit(out);
    return kExitOk;
}

int run_trajectory(const std::string& report_path, const std::string& instrument,
                   const std::string& level) {
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw cf::CfError(cf::errkind::io_error, "cannot open report " + report_path);
    cf::Json report = cf::Json::parse(in);
    cf::Json out = cf::Json::array();
    if (report.contains("per_case")) {
        for (const auto& c : report.at("per_case")) {
            for (const auto& ie : c.at("instruments")) {
                if (ie.at("instrument_id").get<std::string>() != instrument) continue;
                if (!level.empty() && ie.at("level").get<std::string>() != level) continue;
                if (!ie.contains("trajectory")) continue;
                cf::Json entry;
                entry["case_id"] = c.at("case_id");
                entry["level"] = ie.at("level");
                entry["trajectory"] = ie.at("trajectory");
                out.push_back(std::move(entry));
            }
        }
    }
    emit(out);
    return kExitOk;
}

int run_skills(const std::string& action, const std::string& meta_path,
               const std::string& atomic_path, const std::string& therapy, int stage) {
    cf::TaxonomyLoadResult result = cf::load_taxonomy_files(meta_path, atomic_path);
    if (action == "lint") {
        cf::Json out;
        out["ok"] = result.ok();
        out["errors"] = result.report.to_json();
        emit(out);
        return result.ok() ? kExitOk : kExitFindings;
    }
    if (!result.ok()) {
        std::cerr << "taxonomy errors: " << result.report.summary() << "\n";
        return kExitFindings;
    }
    if (action == "stats") {
        cf::Json out;
        out["meta_total"] = result.library.meta_total();
        out["atomic_total"] = result.library.atomic_total();
        cf::Json per = cf::Json::object();
        for (const auto& [sect, counts] : result.library.counts_per_therapy()) {
            cf::Json e;
            e["meta"] = counts.first;
            e["atomic"] = counts.second;
            per[sect] = std::move(e);
        }
        out["per_therapy"] = std::move(per);
        emit(out);
        return kExitOk;
    }
    // query
    auto t = cf::therapy_from_string(therapy);
    if (!t) {
        std::cerr << "unknown therapy label: " << therapy << "\n";
        return kExitError;
    }
    auto metas = cf::coarse_filter(result.library, {*t}, stage);
    cf::Json out = cf::Json::array();
    for (const auto& m : metas) {
        cf::Json e;
        e["skill_id"] = m.skill_id;
        e["skill_name"] = m.skill_name;
        e["sect"] = cf::to_string(m.sect);
        out.push_back(std::move(e));
    }
    emit(out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counselforge: multi-session counseling corpus engine"};
    app.require_subcommand(1);
    std::string config_dir = default_config_dir();
    app.add_option("--config-dir", config_dir, "configuration directory");

    std::string aliases;
    app.add_option("--aliases", aliases, "field-alias map (JSON object old->new)");

    auto* validate = app.add_subcommand("validate", "validate a JSONL corpus");
    std::string v_corpus;
    validate->add_option("--corpus", v_corpus, "JSONL corpus path")->required();

    auto* stats = app.add_subcommand("stats", "corpus statistics");
    std::string s_corpus, s_meta, s_atomic;
    stats->add_option("--corpus", s_corpus)->required();
    stats->add_option("--meta", s_meta, "meta-skill JSONL");
    stats->add_option("--atomic", s_atomic, "atomic-skill JSONL");

    auto* plan_stats = app.add_subcommand("plan-stats", "global-plan statistics");
    std::string p_corpus;
    plan_stats->add_option("--corpus", p_corpus)->required();

    auto* generate = app.add_subcommand("generate", "run the multi-session pipeline over seeds");
    std::string g_seed, g_out = "out", g_replay, g_record, g_meta, g_atomic;
    int g_max_cases = 0;
    int g_jobs = 1;
    size_t g_min_turns = 22, g_max_turns = 70;
    int g_k = 60;
    generate->add_option("--seed", g_seed, "seed JSONL (one case seed per line)")->required();
    generate->add_option("--out", g_out, "output directory");
    generate->add_option("--replay", g_replay, "replay log (offline mode)");
    generate->add_option("--record", g_record, "record provider exchanges to this log");
    generate->add_option("--meta", g_meta, "meta-skill JSONL")->required();
    generate->add_option("--atomic", g_atomic, "atomic-skill JSONL")->required();
    generate->add_option("--max-cases", g_max_cases, "stop after N seeds");
    generate->add_option("--jobs", g_jobs, "cases generated concurrently");
    generate->add_option("--min-turns", g_min_turns, "turn-count flag threshold (lower)");
    generate->add_option("--max-turns", g_max_turns, "turn-count flag threshold (upper)");
    generate->add_option("--k-skills", g_k, "atomic-skill candidate budget");

    auto* evaluate = app.add_subcommand("evaluate", "judge-based corpus evaluation");
    std::string e_corpus, e_level = "both", e_scope = "both", e_out, e_replay, e_record;
    size_t e_sample = 0;
    uint64_t e_seed = 0;
    bool e_pooled = false;
    evaluate->add_option("--corpus", e_corpus)->required();
    evaluate->add_option("--level", e_level)->check(CLI::IsMember({"counselor", "client", "both"}));
    evaluate->add_option("--scope", e_scope)->check(CLI::IsMember({"shared", "specific", "both"}));
    evaluate->add_option("--sample", e_sample, "sample size (0 = all)");
    evaluate->add_option("--seed", e_seed, "sampling seed");
    evaluate->add_option("--out", e_out, "write the report here as well");
    evaluate->add_option("--replay", e_replay, "judge replay log");
    evaluate->add_option("--record", e_record, "record judge exchanges");
    evaluate->add_flag("--pooled-diffs", e_pooled, "pool adjacent pairs across cases");
    int e_parallel = 1;
    evaluate->add_option("--parallel", e_parallel, "concurrent instrument scoring tasks");

    auto* trajectory = app.add_subcommand("trajectory", "extract per-case trajectories");
    std::string t_report, t_instrument, t_level;
    trajectory->add_option("--report", t_report)->required();
    trajectory->add_option("--instrument", t_instrument)->required();
    trajectory->add_option("--level", t_level);

    auto* skills = app.add_subcommand("skills", "taxonomy tools");
    skills->require_subcommand(1);
    std::string k_meta, k_atomic, k_therapy = "cbt";
    int k_stage = 1;
    auto* lint = skills->add_subcommand("lint", "validate taxonomy files");
    auto* sstats = skills->add_subcommand("stats", "taxonomy counts");
    auto* query = skills->add_subcommand("query", "stage/therapy coarse filter");
    for (auto* sub : {lint, sstats, query}) {
        sub->add_option("--meta", k_meta)->required();
        sub->add_option("--atomic", k_atomic)->required();
    }
    query->add_option("--therapy", k_therapy);
    query->add_option("--stage", k_stage)->check(CLI::Range(1, 3));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate) return run_validate(v_corpus, aliases);
        if (*stats) return run_stats(s_corpus, s_meta, s_atomic, aliases);
        if (*plan_stats) return run_plan_stats(p_corpus, aliases);
        if (*generate)
            return run_generate(g_seed, g_out, g_replay, g_record, g_meta, g_atomic, g_max_cases,
                                g_jobs, g_min_turns, g_max_turns, g_k, config_dir);
        if (*evaluate)
            return run_evaluate(e_corpus, e_level, e_scope, e_sample, e_seed, e_out, e_replay,
                                e_record, e_pooled, e_parallel, config_dir);
        if (*trajectory) return run_trajectory(t_report, t_instrument, t_level);
        if (*skills) {
            const std::string action = lint->parsed() ? "lint" : sstats->parsed() ? "stats" : "query";
            return run_skills(action, k_meta, k_atomic, k_therapy, k_stage);
        }
    } catch (const cf::CfError& e) {
        std::cerr << "error (" << e.kind() << "): " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
