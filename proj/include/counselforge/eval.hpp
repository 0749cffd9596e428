#pragma once

#include "counselforge/case_record.hpp"
#include "counselforge/gateway.hpp"
#include "counselforge/profile.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace counselforge {

// Exact rational arithmetic for scale math; rendering rounds to 2 decimals.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d = 1);

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;
    Rational operator-() const { return {-num, den}; }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }

    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string to_decimal(int places = 2) const;
};

Rational rational_mean(const std::vector<Rational>& values);

enum class EvalLevel { counselor, client };
enum class EvalScope { shared, specific };
enum class Direction { higher_better, lower_better };

std::string to_string(EvalLevel l);
std::string to_string(EvalScope s);

struct SubScale {
    std::string id;
    int item_count = 0;
    std::string template_id;
};

struct Instrument {
    std::string id;
    EvalLevel level = EvalLevel::counselor;
    EvalScope scope = EvalScope::shared;
    std::set<Therapy> applicable_therapies;  // empty = all (shared)
    int item_count = 0;
    int item_min = 1;
    int item_max = 5;
    Direction direction = Direction::higher_better;
    std::string template_id;
    std::vector<SubScale> sub_scales;  // Customized only
};

class InstrumentRegistry {
  public:
    // The fixed 18-instrument registry (9 counselor-level, 9 client-level).
    static InstrumentRegistry builtin();
    // Item inventories are configuration: a JSON file may override counts,
    // ranges and template ids of builtin entries.
    static InstrumentRegistry with_overrides(const std::string& config_path);

    const std::vector<Instrument>& all() const { return instruments_; }
    const Instrument* find(const std::string& id, EvalLevel level) const;

    // Shared instruments of the level plus the specific one of the therapy;
    // integrative cases route through the union of their selected therapies.
    std::vector<const Instrument*> applicable(Therapy therapy, EvalLevel level,
                                              const std::set<Therapy>& integrative_union = {}) const;

    void add(Instrument instrument) { instruments_.push_back(std::move(instrument)); }

  private:
    std::vector<Instrument> instruments_;
};

struct ItemScore {
    std::string item;
    int score = 0;
};

struct ItemScores {
    std::string instrument_id;
    std::vector<ItemScore> items;
};

// Independent of the judge path: exact coverage of "1"..item_count and range
// per item. Returns an error summary or nullopt.
std::optional<std::string> validate_item_scores(const Json& payload, const Instrument& instrument,
                                                ItemScores* out = nullptr);

struct ScaleScore {
    std::string instrument_id;
    Rational raw_mean;
    Rational normalized;  // (raw_mean - min) / (max - min) * 10
    int n_items = 0;
};

ScaleScore aggregate_scale(const ItemScores& items, const Instrument& instrument);

struct TrajectoryReport {
    std::string instrument_id;
    std::vector<ScaleScore> per_session;
    std::vector<Rational> adjacent_diffs;  // s[i+1].normalized - s[i].normalized
    Rational mean_diff;
};

// Throws too_few_sessions when fewer than two points. For lower_better
// instruments a negative mean_diff reads as improvement.
TrajectoryReport adjacent_difference(const std::vector<ScaleScore>& per_session);

struct SessionScore {
    int session_number = 0;
    ItemScores items;
    ScaleScore scale;
    int attempt_count = 1;
    // Customized: per-domain detail behind the averaged scale.
    std::vector<std::pair<std::string, ScaleScore>> sub_scales;
};

struct InstrumentEvaluation {
    std::string instrument_id;
    EvalLevel level = EvalLevel::counselor;
    EvalScope scope = EvalScope::shared;
    Direction direction = Direction::higher_better;
    std::vector<SessionScore> sessions;
    std::optional<TrajectoryReport> trajectory;
    std::string provider_id;
    std::string error;  // nonempty when the judge failed; no scores fabricated
};

struct CaseEvaluation {
    std::string case_id;
    Therapy therapy = Therapy::cbt;
    std::vector<InstrumentEvaluation> instruments;
};

struct EvalOptions {
    bool counselor_level = true;
    bool client_level = true;
    bool shared_scope = true;
    bool specific_scope = true;
    bool pooled_diffs = false;  // pool adjacent pairs across cases instead of per-case means
    // Instrument-level scoring tasks are independent; >1 runs them on a small
    // pool. The report is assembled in registry order either way.
    int max_parallel = 1;
};

// Scores one session with the judge; retries via gateway policy on item
// coverage / range failures.
SessionScore score_session(const SessionTranscript& transcript, const Json& profile_context,
                           const Instrument& instrument, const Gateway& judge);

CaseEvaluation evaluate_case(const CaseRecord& record, const Gateway& judge,
                             const InstrumentRegistry& registry, const EvalOptions& options = {});

struct CorpusEvaluation {
    std::vector<CaseEvaluation> per_case;
    // instrument -> corpus mean of per-case session means (normalized scale)
    std::vector<std::pair<std::string, Rational>> corpus_means;
    // instrument -> mean adjacent difference
    std::vector<std::pair<std::string, Rational>> corpus_mean_diffs;
    std::vector<size_t> sampled_indices;
};

// k = 0 evaluates the whole corpus. Sampling is uniform and deterministic
// given the seed.
CorpusEvaluation evaluate_corpus(const std::vector<CaseRecord>& corpus, const Gateway& judge,
                                 const InstrumentRegistry& registry, size_t sample, uint64_t seed,
                                 const EvalOptions& options = {});

std::vector<size_t> sample_indices(size_t population, size_t sample, uint64_t seed);

Json to_json(const ScaleScore& s);
Json to_json(const TrajectoryReport& t);
Json to_json(const CaseEvaluation& e);
Json to_json(const CorpusEvaluation& e);

}  // namespace counselforge
