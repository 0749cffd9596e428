#pragma once

#include "counselforge/errors.hpp"
#include "counselforge/jsonio.hpp"

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace counselforge {

enum class TemperatureClass { deterministic, creative };

struct ChatRequest {
    std::string template_id;
    std::map<std::string, Json> variables;
    TemperatureClass temperature = TemperatureClass::deterministic;
    int max_retries = 3;
};

struct ChatResponse {
    std::string raw_text;
    Json parsed;
    int attempt_count = 1;
    std::string provider_id;
};

struct RenderedRequest {
    std::string template_id;
    std::string prompt;
    std::string digest;
    TemperatureClass temperature = TemperatureClass::deterministic;
    std::map<std::string, Json> variables;
};

// Canonical digest of (template_id, variables): key order of the variable
// maps never matters.
std::string request_digest(const std::string& template_id,
                           const std::map<std::string, Json>& variables);

// Text templates with {{name}} placeholders; template_id = file stem.
class TemplateRegistry {
  public:
    void add(const std::string& id, std::string body);
    void load_directory(const std::string& dir);  // *.txt files
    bool has(const std::string& id) const;
    std::vector<std::string> ids() const;

    // Binds every placeholder; throws unbound_placeholder when a placeholder
    // has no variable, unknown_template for a missing id. String variables
    // are inserted raw, other JSON values canonically serialized.
    std::string render(const std::string& id, const std::map<std::string, Json>& variables) const;

  private:
    std::map<std::string, std::string> templates_;
};

class ChatProvider {
  public:
    virtual ~ChatProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string complete_text(const RenderedRequest& req) = 0;
};

// Deterministic provider backed by a function, the unit-test workhorse.
class ScriptedProvider : public ChatProvider {
  public:
    using Fn = std::function<std::string(const RenderedRequest&)>;
    ScriptedProvider(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
    std::string id() const override { return id_; }
    std::string complete_text(const RenderedRequest& req) override { return fn_(req); }

  private:
    std::string id_;
    Fn fn_;
};

// Answers only digests present in the loaded log; anything else is a
// replay_miss. Reads are lock-free after load.
class ReplayProvider : public ChatProvider {
  public:
    static std::shared_ptr<ReplayProvider> from_file(const std::string& path);
    static std::shared_ptr<ReplayProvider> from_jsonl(const std::string& jsonl);

    std::string id() const override { return "replay"; }
    std::string complete_text(const RenderedRequest& req) override;
    size_t size() const { return entries_.size(); }

  private:
    std::unordered_map<std::string, std::string> entries_;
};

// Wraps a provider and appends {digest, raw_text} JSONL entries; appends are
// serialized, one digest recorded once.
class RecordingProvider : public ChatProvider {
  public:
    RecordingProvider(std::shared_ptr<ChatProvider> inner, std::string log_path);
    std::string id() const override { return inner_->id(); }
    std::string complete_text(const RenderedRequest& req) override;

  private:
    std::shared_ptr<ChatProvider> inner_;
    std::string log_path_;
    std::mutex mutex_;
    std::unordered_map<std::string, bool> written_;
};

// OpenAI-style chat-completions endpoint. Slot env vars:
//   COUNSELFORGE_GENERATOR_URL / _KEY / _MODEL
//   COUNSELFORGE_JUDGE_URL / _KEY / _MODEL
struct HttpProviderConfig {
    std::string base_url;
    std::string api_key;
    std::string model;
    double deterministic_temperature = 0.0;
    double creative_temperature = 0.8;
    int timeout_seconds = 120;
};

class HttpProvider : public ChatProvider {
  public:
    explicit HttpProvider(HttpProviderConfig config, std::string slot_name);
    static std::shared_ptr<HttpProvider> from_env(const std::string& slot);  // "generator"/"judge"

    std::string id() const override { return slot_name_ + ":" + config_.model; }
    std::string complete_text(const RenderedRequest& req) override;

  private:
    HttpProviderConfig config_;
    std::string slot_name_;
};

// Validator contract: return std::nullopt and fill `parsed` on success, or an
// error summary that is fed back to the provider on the next attempt.
using ResponseValidator =
    std::function<std::optional<std::string>(const std::string& raw_text, Json& parsed)>;

ResponseValidator accept_any_text();

struct GatewayOptions {
    int default_max_retries = 3;
    int max_in_flight = 0;  // 0 = unlimited
};

// One named slot (generator or judge) behind the retry policy.
class Gateway {
  public:
    Gateway(TemplateRegistry templates, std::shared_ptr<ChatProvider> provider,
            GatewayOptions options = {});

    ChatResponse complete(const ChatRequest& req, const ResponseValidator& validate) const;

    const TemplateRegistry& templates() const { return templates_; }
    std::shared_ptr<ChatProvider> provider() const { return provider_; }

  private:
    TemplateRegistry templates_;
    std::shared_ptr<ChatProvider> provider_;
    GatewayOptions options_;
    mutable std::mutex inflight_mutex_;
    mutable std::condition_variable inflight_cv_;
    mutable int in_flight_ = 0;
};

// Strips fences/prose, finds the outermost balanced JSON value, parses it.
// The only repairs applied are fence stripping and trailing-comma removal.
Json extract_json_payload(const std::string& raw);

}  // namespace counselforge
