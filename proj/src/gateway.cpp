#include "counselforge/gateway.hpp"

#include "counselforge/text.hpp"

#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace counselforge {

std::string request_digest(const std::string& template_id,
                           const std::map<std::string, Json>& variables) {
    Json vars = Json::object();
    for (const auto& [k, v] : variables) vars[k] = v;
    return fnv1a_hex(template_id + "\x1f" + canonical_json(sort_keys(vars)));
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

void TemplateRegistry::add(const std::string& id, std::string body) {
    templates_[id] = std::move(body);
}

void TemplateRegistry::load_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw CfError(errkind::io_error, "not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        add(entry.path().stem().string(), ss.str());
    }
}

bool TemplateRegistry::has(const std::string& id) const { return templates_.count(id) > 0; }

std::vector<std::string> TemplateRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : templates_) out.push_back(k);
    return out;
}

std::string TemplateRegistry::render(const std::string& id,
                                     const std::map<std::string, Json>& variables) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw CfError(errkind::unknown_template, id);
    const std::string& body = it->second;
    std::string out;
    out.reserve(body.size());
    size_t pos = 0;
    while (pos < body.size()) {
        const size_t open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, body.size() - pos);
            break;
        }
        out.append(body, pos, open - pos);
        const size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(body, open, body.size() - open);
            break;
        }
        const std::string name = text::trim(body.substr(open + 2, close - open - 2));
        auto var = variables.find(name);
        if (var == variables.end())
            throw CfError(errkind::unbound_placeholder, id + ": {{" + name + "}}");
        if (var->second.is_string())
            out += var->second.get<std::string>();
        else
            out += canonical_json(var->second);
        pos = close + 2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Replay / recording
// ---------------------------------------------------------------------------

std::shared_ptr<ReplayProvider> ReplayProvider::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CfError(errkind::io_error, "cannot open replay log " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_jsonl(ss.str());
}

std::shared_ptr<ReplayProvider> ReplayProvider::from_jsonl(const std::string& jsonl) {
    auto provider = std::make_shared<ReplayProvider>();
    std::istringstream in(jsonl);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("digest") || !j.contains("raw_text"))
            throw CfError(errkind::io_error,
                          "replay log line " + std::to_string(line_no) + " malformed");
        const std::string digest = j.at("digest").get<std::string>();
        if (provider->entries_.count(digest))
            throw CfError(errkind::io_error, "duplicate digest in replay log: " + digest);
        provider->entries_[digest] = j.at("raw_text").get<std::string>();
    }
    return provider;
}

std::string ReplayProvider::complete_text(const RenderedRequest& req) {
    auto it = entries_.find(req.digest);
    if (it == entries_.end())
        throw CfError(errkind::replay_miss, req.template_id + " digest " + req.digest);
    return it->second;
}

RecordingProvider::RecordingProvider(std::shared_ptr<ChatProvider> inner, std::string log_path)
    : inner_(std::move(inner)), log_path_(std::move(log_path)) {}

std::string RecordingProvider::complete_text(const RenderedRequest& req) {
    std::string raw = inner_->complete_text(req);
    std::lock_guard<std::mutex> lock(mutex_);
    if (!written_.count(req.digest)) {
        written_[req.digest] = true;
        Json entry;
        entry["digest"] = req.digest;
        entry["raw_text"] = raw;
        std::ofstream out(log_path_, std::ios::binary | std::ios::app);
        if (!out) throw CfError(errkind::io_error, "cannot append to " + log_path_);
        out << canonical_json(entry) << "\n";
    }
    return raw;
}

// ---------------------------------------------------------------------------
// HTTP provider
// ---------------------------------------------------------------------------

HttpProvider::HttpProvider(HttpProviderConfig config, std::string slot_name)
    : config_(std::move(config)), slot_name_(std::move(slot_name)) {}

std::shared_ptr<HttpProvider> HttpProvider::from_env(const std::string& slot) {
    std::string upper = slot;
    for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    auto env = [](const std::string& name) -> std::string {
        const char* v = std::getenv(name.c_str());
        return v ? v : "";
    };
    HttpProviderConfig cfg;
    cfg.base_url = env("COUNSELFORGE_" + upper + "_URL");
    cfg.api_key = env("COUNSELFORGE_" + upper + "_KEY");
    cfg.model = env("COUNSELFORGE_" + upper + "_MODEL");
    if (cfg.base_url.empty())
        throw CfError(errkind::provider_unreachable,
                      "COUNSELFORGE_" + upper + "_URL is not set");
    return std::make_shared<HttpProvider>(std::move(cfg), slot);
}

std::string HttpProvider::complete_text(const RenderedRequest& req) {
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(10, 0);
    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    Json body;
    if (!config_.model.empty()) body["model"] = config_.model;
    Json message;
    message["role"] = "user";
    message["content"] = req.prompt;
    body["messages"] = Json::array({message});
    body["temperature"] = req.temperature == TemperatureClass::deterministic
                              ? config_.deterministic_temperature
                              : config_.creative_temperature;

    auto res = client.Post("/v1/chat/completions", headers, canonical_json(body),
                           "application/json");
    if (!res)
        throw CfError(errkind::provider_unreachable,
                      slot_name_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw CfError(errkind::provider_unreachable,
                      slot_name_ + ": HTTP " + std::to_string(res->status));
    Json j = Json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j.at("choices").empty())
        throw CfError(errkind::provider_unreachable, slot_name_ + ": malformed completion body");
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

ResponseValidator accept_any_text() {
    return [](const std::string& raw, Json& parsed) -> std::optional<std::string> {
        parsed = raw;
        return std::nullopt;
    };
}

Gateway::Gateway(TemplateRegistry templates, std::shared_ptr<ChatProvider> provider,
                 GatewayOptions options)
    : templates_(std::move(templates)), provider_(std::move(provider)), options_(options) {}

ChatResponse Gateway::complete(const ChatRequest& req, const ResponseValidator& validate) const {
    struct InFlightGuard {
        const Gateway* g;
        explicit InFlightGuard(const Gateway* gw) : g(gw) {
            if (g->options_.max_in_flight <= 0) return;
            std::unique_lock<std::mutex> lock(g->inflight_mutex_);
            g->inflight_cv_.wait(lock, [&] { return g->in_flight_ < g->options_.max_in_flight; });
            ++g->in_flight_;
        }
        ~InFlightGuard() {
            if (g->options_.max_in_flight <= 0) return;
            {
                std::lock_guard<std::mutex> lock(g->inflight_mutex_);
                --g->in_flight_;
            }
            g->inflight_cv_.notify_one();
        }
    } guard(this);

    const int max_attempts = req.max_retries > 0 ? req.max_retries : options_.default_max_retries;
    std::string last_error = "no attempt made";
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        std::map<std::string, Json> vars = req.variables;
        if (attempt > 1) vars["validator_feedback"] = last_error;

        RenderedRequest rendered;
        rendered.template_id = req.template_id;
        rendered.prompt = templates_.render(req.template_id, req.variables);
        if (attempt > 1)
            rendered.prompt +=
                "\n\n[validator feedback, fix the previous response]\n" + last_error;
        rendered.digest = request_digest(req.template_id, vars);
        rendered.temperature = req.temperature;
        rendered.variables = vars;

        const std::string raw = provider_->complete_text(rendered);
        Json parsed;
        auto error = validate(raw, parsed);
        if (!error) {
            ChatResponse resp;
            resp.raw_text = raw;
            resp.parsed = std::move(parsed);
            resp.attempt_count = attempt;
            resp.provider_id = provider_->id();
            return resp;
        }
        last_error = *error;
    }
    throw CfError(errkind::retries_exhausted, req.template_id + ": " + last_error);
}

// ---------------------------------------------------------------------------
// JSON payload extraction
// ---------------------------------------------------------------------------

namespace {

// Removes commas that directly precede a closing brace/bracket, outside
// strings.
std::string strip_trailing_commas(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_string = false;
    bool escaped = false;
    for (size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            out.push_back(c);
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            size_t k = i + 1;
            while (k < s.size() && (s[k] == ' ' || s[k] == '\n' || s[k] == '\r' || s[k] == '\t'))
                ++k;
            if (k < s.size() && (s[k] == '}' || s[k] == ']')) continue;  // drop the comma
        }
        out.push_back(c);
    }
    return out;
}

std::optional<Json> try_parse(const std::string& s) {
    Json j = Json::parse(s, nullptr, false);
    if (j.is_discarded()) {
        j = Json::parse(strip_trailing_commas(s), nullptr, false);
        if (j.is_discarded()) return std::nullopt;
    }
    return j;
}

// Finds the first balanced {...} or [...] span starting at or after `from`.
// Returns [start, end) or nullopt; sets `unbalanced` when an opener never
// closes.
std::optional<std::pair<size_t, size_t>> balanced_span(const std::string& s, size_t from,
                                                       bool& unbalanced) {
    size_t start = std::string::npos;
    for (size_t i = from; i < s.size(); ++i) {
        if (s[i] == '{' || s[i] == '[') {
            start = i;
            break;
        }
    }
    if (start == std::string::npos) return std::nullopt;
    std::vector<char> stack;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            stack.push_back(c);
        } else if (c == '}' || c == ']') {
            if (stack.empty()) continue;
            const char open = stack.back();
            if ((c == '}' && open != '{') || (c == ']' && open != '[')) {
                unbalanced = true;
                return std::nullopt;
            }
            stack.pop_back();
            if (stack.empty()) return std::make_pair(start, i + 1);
        }
    }
    unbalanced = true;
    return std::nullopt;
}

}  // namespace

Json extract_json_payload(const std::string& raw) {
    const std::string trimmed = text::trim(raw);
    if (trimmed.empty()) throw CfError(errkind::no_json_found, "empty response");

    if (auto direct = try_parse(trimmed)) return *direct;

    // Fenced block: take the body of the first ``` ... ``` pair.
    std::string search_space = trimmed;
    const size_t fence = trimmed.find("```");
    if (fence != std::string::npos) {
        size_t body_start = fence + 3;
        const size_t newline = trimmed.find('\n', body_start);
        // skip an optional language tag line such as ```json
        if (newline != std::string::npos &&
            trimmed.find("```", body_start) > newline)
            body_start = newline + 1;
        const size_t body_end = trimmed.find("```", body_start);
        if (body_end != std::string::npos) {
            const std::string body = text::trim(trimmed.substr(body_start, body_end - body_start));
            if (auto parsed = try_parse(body)) return *parsed;
            search_space = body;
        }
    }

    bool unbalanced = false;
    size_t from = 0;
    while (true) {
        auto span = balanced_span(search_space, from, unbalanced);
        if (!span) break;
        const std::string candidate = search_space.substr(span->first, span->second - span->first);
        if (auto parsed = try_parse(candidate)) return *parsed;
        from = span->first + 1;
    }
    // Fall back to scanning the full text when the fence body failed.
    if (search_space != trimmed) {
        from = 0;
        while (true) {
            auto span = balanced_span(trimmed, from, unbalanced);
            if (!span) break;
            const std::string candidate = trimmed.substr(span->first, span->second - span->first);
            if (auto parsed = try_parse(candidate)) return *parsed;
            from = span->first + 1;
        }
    }
    if (unbalanced) throw CfError(errkind::unbalanced_braces, "unclosed JSON container");
    throw CfError(errkind::no_json_found, "no balanced JSON value in response");
}

}  // namespace counselforge
