#include "counselforge/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace counselforge {

// ---------------------------------------------------------------------------
// Rational
// ---------------------------------------------------------------------------

namespace {
long long gcd_ll(long long a, long long b) {
    a = a < 0 ? -a : a;
    b = b < 0 ? -b : b;
    while (b) {
        const long long t = a % b;
        a = b;
        b = t;
    }
    return a == 0 ? 1 : a;
}
}  // namespace

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long long g = gcd_ll(num, den);
    num /= g;
    den /= g;
}

Rational Rational::operator+(const Rational& o) const {
    return {num * o.den + o.num * den, den * o.den};
}
Rational Rational::operator-(const Rational& o) const {
    return {num * o.den - o.num * den, den * o.den};
}
Rational Rational::operator*(const Rational& o) const { return {num * o.num, den * o.den}; }
Rational Rational::operator/(const Rational& o) const {
    if (o.num == 0) throw std::invalid_argument("rational division by zero");
    return {num * o.den, den * o.num};
}

std::string Rational::to_decimal(int places) const {
    long long scale = 1;
    for (int i = 0; i < places; ++i) scale *= 10;
    const bool negative = num < 0;
    const long long n = negative ? -num : num;
    // round half away from zero
    const long long scaled = (n * scale * 2 + den) / (2 * den);
    const long long whole = scaled / scale;
    long long frac = scaled % scale;
    std::string out = (negative && scaled != 0 ? "-" : "") + std::to_string(whole);
    if (places > 0) {
        std::string f = std::to_string(frac);
        out += "." + std::string(static_cast<size_t>(places) - f.size(), '0') + f;
    }
    return out;
}

Rational rational_mean(const std::vector<Rational>& values) {
    if (values.empty()) throw std::invalid_argument("mean of empty list");
    Rational sum{0, 1};
    for (const auto& v : values) sum = sum + v;
    return sum / Rational(static_cast<long long>(values.size()), 1);
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

std::string to_string(EvalLevel l) { return l == EvalLevel::counselor ? "counselor" : "client"; }
std::string to_string(EvalScope s) { return s == EvalScope::shared ? "shared" : "specific"; }

InstrumentRegistry InstrumentRegistry::builtin() {
    InstrumentRegistry r;
    auto shared = [](std::string id, EvalLevel level, int items, int lo, int hi, Direction dir,
                     std::string tpl) {
        Instrument i;
        i.id = std::move(id);
        i.level = level;
        i.scope = EvalScope::shared;
        i.item_count = items;
        i.item_min = lo;
        i.item_max = hi;
        i.direction = dir;
        i.template_id = std::move(tpl);
        return i;
    };
    auto specific = [](std::string id, EvalLevel level, Therapy t, int items, int lo, int hi,
                       Direction dir, std::string tpl) {
        Instrument i;
        i.id = std::move(id);
        i.level = level;
        i.scope = EvalScope::specific;
        i.applicable_therapies = {t};
        i.item_count = items;
        i.item_min = lo;
        i.item_max = hi;
        i.direction = dir;
        i.template_id = std::move(tpl);
        return i;
    };

    // Counselor level, therapy-shared.
    r.add(shared("WAI", EvalLevel::counselor, 12, 1, 5, Direction::higher_better, "eval_wai"));
    r.add(shared("HTAIS", EvalLevel::counselor, 16, 1, 5, Direction::higher_better, "eval_htais"));
    r.add(shared("RRO", EvalLevel::counselor, 12, 1, 5, Direction::higher_better,
                 "eval_rro_counselor"));
    {
        Instrument custom;
        custom.id = "Customized";
        custom.level = EvalLevel::counselor;
        custom.scope = EvalScope::shared;
        custom.item_min = 1;
        custom.item_max = 5;
        custom.direction = Direction::higher_better;
        custom.sub_scales = {
            {"ClinicalPerception", 21, "eval_custom_clinical_perception"},
            {"InterventionStrategy", 15, "eval_custom_intervention_strategy"},
            {"ConversationalTherapeuticDepth", 14, "eval_custom_conversational_depth"},
            {"ClinicalEthicsSafety", 15, "eval_custom_ethics_safety"},
        };
        r.add(std::move(custom));
    }
    // Counselor level, therapy-specific.
    r.add(specific("CTRS", EvalLevel::counselor, Therapy::cbt, 11, 1, 5, Direction::higher_better,
                   "eval_ctrs"));
    r.add(specific("PSC", EvalLevel::counselor, Therapy::pdt, 12, 1, 5, Direction::higher_better,
                   "eval_psc"));
    r.add(specific("TES", EvalLevel::counselor, Therapy::het, 9, 1, 5, Direction::higher_better,
                   "eval_tes"));
    r.add(specific("EFT-TFS", EvalLevel::counselor, Therapy::bt, 10, 1, 5,
                   Direction::higher_better, "eval_eft_tfs"));
    r.add(specific("MITI", EvalLevel::counselor, Therapy::pmt, 10, 1, 5, Direction::higher_better,
                   "eval_miti"));

    // Client level, therapy-shared.
    r.add(shared("RRO", EvalLevel::client, 12, 1, 5, Direction::higher_better, "eval_rro_client"));
    r.add(shared("PANAS", EvalLevel::client, 20, 1, 5, Direction::higher_better, "eval_panas"));
    r.add(shared("SCL-90", EvalLevel::client, 90, 1, 5, Direction::lower_better, "eval_scl90"));
    r.add(shared("SRS", EvalLevel::client, 4, 1, 5, Direction::higher_better, "eval_srs"));
    // Client level, therapy-specific.
    r.add(specific("BDI-II", EvalLevel::client, Therapy::cbt, 21, 0, 3, Direction::lower_better,
                   "eval_bdi2"));
    r.add(specific("IPO", EvalLevel::client, Therapy::pdt, 16, 1, 5, Direction::lower_better,
                   "eval_ipo"));
    r.add(specific("CCT", EvalLevel::client, Therapy::het, 10, 1, 5, Direction::higher_better,
                   "eval_cct"));
    r.add(specific("SFBT", EvalLevel::client, Therapy::pmt, 10, 1, 5, Direction::higher_better,
                   "eval_sfbt"));
    r.add(specific("STAI", EvalLevel::client, Therapy::bt, 20, 1, 4, Direction::higher_better,
                   "eval_stai"));
    return r;
}

InstrumentRegistry InstrumentRegistry::with_overrides(const std::string& config_path) {
    InstrumentRegistry r = builtin();
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw CfError(errkind::io_error, "cannot open " + config_path);
    Json j = Json::parse(in);
    if (!j.is_object() || !j.contains("instruments")) return r;
    for (const auto& entry : j.at("instruments")) {
        if (!entry.is_object() || !entry.contains("id") || !entry.contains("level")) continue;
        const std::string id = entry.at("id").get<std::string>();
        const EvalLevel level = entry.at("level").get<std::string>() == "client"
                                    ? EvalLevel::client
                                    : EvalLevel::counselor;
        for (auto& inst : r.instruments_) {
            if (inst.id != id || inst.level != level) continue;
            if (entry.contains("item_count")) inst.item_count = entry.at("item_count").get<int>();
            if (entry.contains("item_min")) inst.item_min = entry.at("item_min").get<int>();
            if (entry.contains("item_max")) inst.item_max = entry.at("item_max").get<int>();
            if (entry.contains("template_id"))
                inst.template_id = entry.at("template_id").get<std::string>();
        }
    }
    return r;
}

const Instrument* InstrumentRegistry::find(const std::string& id, EvalLevel level) const {
    for (const auto& i : instruments_)
        if (i.id == id && i.level == level) return &i;
    return nullptr;
}

std::vector<const Instrument*> InstrumentRegistry::applicable(
    Therapy therapy, EvalLevel level, const std::set<Therapy>& integrative_union) const {
    std::vector<const Instrument*> out;
    for (const auto& i : instruments_) {
        if (i.level != level) continue;
        if (i.scope == EvalScope::shared) {
            out.push_back(&i);
            continue;
        }
        if (therapy == Therapy::integrative) {
            for (Therapy t : integrative_union)
                if (i.applicable_therapies.count(t)) {
                    out.push_back(&i);
                    break;
                }
        } else if (i.applicable_therapies.count(therapy)) {
            out.push_back(&i);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Item scoring
// ---------------------------------------------------------------------------

std::optional<std::string> validate_item_scores(const Json& payload, const Instrument& instrument,
                                                ItemScores* out) {
    if (!payload.is_object() || payload.size() != 1 || !payload.contains("items"))
        return std::string("judge payload must be an object with the single key \"items\"");
    const Json& items = payload.at("items");
    if (!items.is_array()) return std::string("\"items\" must be an array");
    std::vector<bool> seen(static_cast<size_t>(instrument.item_count), false);
    ItemScores scores;
    scores.instrument_id = instrument.id;
    for (const auto& e : items) {
        if (!e.is_object() || !e.contains("item") || !e.contains("score"))
            return std::string("each item must be {\"item\", \"score\"}");
        if (!e.at("item").is_string()) return std::string("item ids must be strings");
        const std::string id = e.at("item").get<std::string>();
        if (id.empty() || id.size() > 4 || id.find_first_not_of("0123456789") != std::string::npos)
            return "item id \"" + id + "\" is not a numeric string";
        const int n = std::stoi(id);
        if (n < 1 || n > instrument.item_count)
            return "item id " + id + " outside 1.." + std::to_string(instrument.item_count);
        if (seen[static_cast<size_t>(n - 1)]) return "duplicate item id " + id;
        seen[static_cast<size_t>(n - 1)] = true;
        if (!e.at("score").is_number_integer())
            return "score for item " + id + " is not an integer";
        const long long s = e.at("score").get<long long>();
        if (s < instrument.item_min || s > instrument.item_max)
            return "score " + std::to_string(s) + " for item " + id + " outside " +
                   std::to_string(instrument.item_min) + ".." + std::to_string(instrument.item_max);
        scores.items.push_back({id, static_cast<int>(s)});
    }
    for (int n = 1; n <= instrument.item_count; ++n)
        if (!seen[static_cast<size_t>(n - 1)]) return "missing item id " + std::to_string(n);
    if (out) *out = std::move(scores);
    return std::nullopt;
}

ScaleScore aggregate_scale(const ItemScores& items, const Instrument& instrument) {
    ScaleScore out;
    out.instrument_id = instrument.id;
    out.n_items = static_cast<int>(items.items.size());
    long long sum = 0;
    for (const auto& i : items.items) sum += i.score;
    out.raw_mean = Rational(sum, out.n_items);
    out.normalized = (out.raw_mean - Rational(instrument.item_min)) /
                     Rational(instrument.item_max - instrument.item_min) * Rational(10);
    return out;
}

TrajectoryReport adjacent_difference(const std::vector<ScaleScore>& per_session) {
    if (per_session.size() < 2)
        throw CfError(errkind::too_few_sessions,
                      std::to_string(per_session.size()) + " session scores");
    TrajectoryReport report;
    report.instrument_id = per_session.front().instrument_id;
    report.per_session = per_session;
    for (size_t i = 0; i + 1 < per_session.size(); ++i)
        report.adjacent_diffs.push_back(per_session[i + 1].normalized - per_session[i].normalized);
    report.mean_diff = rational_mean(report.adjacent_diffs);
    return report;
}

// ---------------------------------------------------------------------------
// Judge calls
// ---------------------------------------------------------------------------

namespace {

SessionScore score_single_instrument(const Json& dialogue, const Json& profile_context,
                                     const Instrument& instrument, const std::string& template_id,
                                     int item_count, const Gateway& judge, ItemScores& items_out) {
    Instrument effective = instrument;
    effective.item_count = item_count;
    effective.template_id = template_id;

    ChatRequest req;
    req.template_id = template_id;
    req.variables["profile"] = profile_context;
    req.variables["dialogue"] = dialogue;
    req.variables["item_count"] = item_count;
    req.variables["score_min"] = instrument.item_min;
    req.variables["score_max"] = instrument.item_max;

    ChatResponse resp = judge.complete(
        req, [&](const std::string& raw, Json& parsed) -> std::optional<std::string> {
            Json payload;
            try {
                payload = extract_json_payload(raw);
            } catch (const CfError& e) {
                return std::string(e.what());
            }
            auto error = validate_item_scores(payload, effective);
            if (error) return error;
            parsed = payload;
            return std::nullopt;
        });

    validate_item_scores(resp.parsed, effective, &items_out);
    SessionScore score;
    score.items = items_out;
    score.scale = aggregate_scale(items_out, effective);
    score.scale.instrument_id = instrument.id;
    score.attempt_count = resp.attempt_count;
    return score;
}

}  // namespace

SessionScore score_session(const SessionTranscript& transcript, const Json& profile_context,
                           const Instrument& instrument, const Gateway& judge) {
    const Json dialogue = dialogue_to_json(transcript.utterances);
    if (instrument.sub_scales.empty()) {
        ItemScores items;
        SessionScore s = score_single_instrument(dialogue, profile_context, instrument,
                                                 instrument.template_id, instrument.item_count,
                                                 judge, items);
        s.session_number = transcript.session_number;
        return s;
    }
    // Customized: each domain scored as its own item set; the scale is the
    // equally weighted mean of the domain scales.
    SessionScore combined;
    combined.session_number = transcript.session_number;
    combined.items.instrument_id = instrument.id;
    std::vector<Rational> raw_means;
    std::vector<Rational> normalized;
    for (const auto& sub : instrument.sub_scales) {
        ItemScores items;
        SessionScore s = score_single_instrument(dialogue, profile_context, instrument,
                                                 sub.template_id, sub.item_count, judge, items);
        combined.attempt_count += s.attempt_count - 1;
        ScaleScore scale = s.scale;
        scale.instrument_id = instrument.id + "/" + sub.id;
        combined.sub_scales.emplace_back(sub.id, scale);
        raw_means.push_back(scale.raw_mean);
        normalized.push_back(scale.normalized);
        for (const auto& item : items.items)
            combined.items.items.push_back({sub.id + ":" + item.item, item.score});
    }
    combined.scale.instrument_id = instrument.id;
    combined.scale.raw_mean = rational_mean(raw_means);
    combined.scale.normalized = rational_mean(normalized);
    combined.scale.n_items = static_cast<int>(combined.items.items.size());
    return combined;
}

CaseEvaluation evaluate_case(const CaseRecord& record, const Gateway& judge,
                             const InstrumentRegistry& registry, const EvalOptions& options) {
    CaseEvaluation eval;
    eval.case_id = record.case_id;
    eval.therapy = record.therapy;

    std::set<Therapy> union_select;
    for (const auto& s : record.sessions)
        for (Therapy t : s.transcript.theory_select) union_select.insert(t);

    std::vector<EvalLevel> levels;
    if (options.counselor_level) levels.push_back(EvalLevel::counselor);
    if (options.client_level) levels.push_back(EvalLevel::client);

    std::vector<const Instrument*> selected;
    for (EvalLevel level : levels) {
        for (const Instrument* inst : registry.applicable(record.therapy, level, union_select)) {
            if (inst->scope == EvalScope::shared && !options.shared_scope) continue;
            if (inst->scope == EvalScope::specific && !options.specific_scope) continue;
            selected.push_back(inst);
        }
    }

    auto score_one = [&](const Instrument* inst) {
        InstrumentEvaluation ie;
        ie.instrument_id = inst->id;
        ie.level = inst->level;
        ie.scope = inst->scope;
        ie.direction = inst->direction;
        try {
            std::vector<ScaleScore> scales;
            for (const auto& session : record.sessions) {
                SessionScore s = score_session(session.transcript,
                                               to_json(session.unlocked_after), *inst, judge);
                scales.push_back(s.scale);
                ie.sessions.push_back(std::move(s));
            }
            if (scales.size() >= 2) ie.trajectory = adjacent_difference(scales);
            ie.provider_id = judge.provider()->id();
        } catch (const CfError& e) {
            ie.sessions.clear();
            ie.trajectory.reset();
            ie.error = e.what();
        }
        return ie;
    };

    eval.instruments.resize(selected.size());
    if (options.max_parallel <= 1 || selected.size() <= 1) {
        for (size_t i = 0; i < selected.size(); ++i) eval.instruments[i] = score_one(selected[i]);
    } else {
        // one slot per instrument; the barrier keeps report order fixed
        std::atomic<size_t> next{0};
        const size_t workers =
            std::min<size_t>(static_cast<size_t>(options.max_parallel), selected.size());
        std::vector<std::thread> threads;
        for (size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                while (true) {
                    const size_t i = next.fetch_add(1);
                    if (i >= selected.size()) return;
                    eval.instruments[i] = score_one(selected[i]);
                }
            });
        }
        for (auto& t : threads) t.join();
    }
    return eval;
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

namespace {

uint64_t uniform_below(std::mt19937_64& rng, uint64_t n) {
    const uint64_t limit = n == 0 ? 0 : UINT64_MAX - UINT64_MAX % n;
    uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

}  // namespace

std::vector<size_t> sample_indices(size_t population, size_t sample, uint64_t seed) {
    std::vector<size_t> all(population);
    std::iota(all.begin(), all.end(), size_t{0});
    if (sample == 0 || sample >= population) return all;
    std::mt19937_64 rng(seed);
    // partial Fisher-Yates, then ascending for corpus-order stability
    for (size_t i = 0; i < sample; ++i) {
        const size_t j = i + static_cast<size_t>(uniform_below(rng, population - i));
        std::swap(all[i], all[j]);
    }
    all.resize(sample);
    std::sort(all.begin(), all.end());
    return all;
}

CorpusEvaluation evaluate_corpus(const std::vector<CaseRecord>& corpus, const Gateway& judge,
                                 const InstrumentRegistry& registry, size_t sample, uint64_t seed,
                                 const EvalOptions& options) {
    if (corpus.empty()) throw CfError(errkind::empty_corpus, "no cases to evaluate");
    CorpusEvaluation out;
    out.sampled_indices = sample_indices(corpus.size(), sample, seed);
    for (size_t idx : out.sampled_indices)
        out.per_case.push_back(evaluate_case(corpus[idx], judge, registry, options));

    // instrument key -> normalized session means / diffs
    std::vector<std::pair<std::string, std::vector<Rational>>> means;
    std::vector<std::pair<std::string, std::vector<Rational>>> diffs;
    auto bucket = [](std::vector<std::pair<std::string, std::vector<Rational>>>& store,
                     const std::string& key) -> std::vector<Rational>& {
        for (auto& [k, v] : store)
            if (k == key) return v;
        store.emplace_back(key, std::vector<Rational>{});
        return store.back().second;
    };
    for (const auto& ce : out.per_case) {
        for (const auto& ie : ce.instruments) {
            if (!ie.error.empty() || ie.sessions.empty()) continue;
            const std::string key = to_string(ie.level) + "/" + ie.instrument_id;
            std::vector<Rational> session_norms;
            for (const auto& s : ie.sessions) session_norms.push_back(s.scale.normalized);
            bucket(means, key).push_back(rational_mean(session_norms));
            if (ie.trajectory) {
                if (options.pooled_diffs) {
                    for (const auto& d : ie.trajectory->adjacent_diffs)
                        bucket(diffs, key).push_back(d);
                } else {
                    bucket(diffs, key).push_back(ie.trajectory->mean_diff);
                }
            }
        }
    }
    for (const auto& [key, values] : means)
        out.corpus_means.emplace_back(key, rational_mean(values));
    for (const auto& [key, values] : diffs)
        out.corpus_mean_diffs.emplace_back(key, rational_mean(values));
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

Json to_json(const ScaleScore& s) {
    Json j;
    j["instrument_id"] = s.instrument_id;
    j["raw_mean"] = s.raw_mean.to_decimal(2);
    j["normalized"] = s.normalized.to_decimal(2);
    j["n_items"] = s.n_items;
    return j;
}

Json to_json(const TrajectoryReport& t) {
    Json j;
    j["instrument_id"] = t.instrument_id;
    Json per_session = Json::array();
    for (const auto& s : t.per_session) per_session.push_back(to_json(s));
    j["per_session"] = std::move(per_session);
    Json diffs = Json::array();
    for (const auto& d : t.adjacent_diffs) diffs.push_back(d.to_decimal(2));
    j["adjacent_diffs"] = std::move(diffs);
    j["mean_diff"] = t.mean_diff.to_decimal(2);
    return j;
}

Json to_json(const CaseEvaluation& e) {
    Json j;
    j["case_id"] = e.case_id;
    j["therapy"] = to_string(e.therapy);
    Json instruments = Json::array();
    for (const auto& ie : e.instruments) {
        Json ji;
        ji["instrument_id"] = ie.instrument_id;
        ji["level"] = to_string(ie.level);
        ji["scope"] = to_string(ie.scope);
        ji["direction"] = ie.direction == Direction::lower_better ? "lower_better" : "higher_better";
        if (!ie.error.empty()) {
            ji["error"] = ie.error;
        } else {
            Json sessions = Json::array();
            for (const auto& s : ie.sessions) {
                Json js;
                js["session_number"] = s.session_number;
                Json items = Json::array();
                for (const auto& item : s.items.items) {
                    Json je;
                    je["item"] = item.item;
                    je["score"] = item.score;
                    items.push_back(std::move(je));
                }
                js["items"] = std::move(items);
                js["scale"] = to_json(s.scale);
                js["attempt_count"] = s.attempt_count;
                if (!s.sub_scales.empty()) {
                    Json subs = Json::array();
                    for (const auto& [id, scale] : s.sub_scales) {
                        Json jsub;
                        jsub["id"] = id;
                        jsub["scale"] = to_json(scale);
                        subs.push_back(std::move(jsub));
                    }
                    js["sub_scales"] = std::move(subs);
                }
                sessions.push_back(std::move(js));
            }
            ji["sessions"] = std::move(sessions);
            if (ie.trajectory) ji["trajectory"] = to_json(*ie.trajectory);
            ji["provider_id"] = ie.provider_id;
        }
        instruments.push_back(std::move(ji));
    }
    j["instruments"] = std::move(instruments);
    return j;
}

Json to_json(const CorpusEvaluation& e) {
    Json j;
    Json per_case = Json::array();
    for (const auto& c : e.per_case) per_case.push_back(to_json(c));
    j["per_case"] = std::move(per_case);
    Json means = Json::object();
    for (const auto& [k, v] : e.corpus_means) means[k] = v.to_decimal(2);
    j["corpus_means"] = std::move(means);
    Json diffs = Json::object();
    for (const auto& [k, v] : e.corpus_mean_diffs) diffs[k] = v.to_decimal(2);
    j["corpus_mean_diffs"] = std::move(diffs);
    return j;
}

}  // namespace counselforge
