#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace counselforge {

// Typed runtime error: `kind` is a stable machine-readable tag, what() the
// human-readable detail.
class CfError : public std::runtime_error {
  public:
    CfError(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

  private:
    std::string kind_;
};

namespace errkind {
inline constexpr const char* provider_unreachable = "provider_unreachable";
inline constexpr const char* replay_miss = "replay_miss";
inline constexpr const char* retries_exhausted = "retries_exhausted";
inline constexpr const char* unknown_template = "unknown_template";
inline constexpr const char* unbound_placeholder = "unbound_placeholder";
inline constexpr const char* no_json_found = "no_json_found";
inline constexpr const char* unbalanced_braces = "unbalanced_braces";
inline constexpr const char* firewall_violation = "firewall_violation";
inline constexpr const char* plan_exhausted = "plan_exhausted";
inline constexpr const char* empty_coarse_set = "empty_coarse_set";
inline constexpr const char* empty_corpus = "empty_corpus";
inline constexpr const char* too_few_sessions = "too_few_sessions";
inline constexpr const char* io_error = "io_error";
inline constexpr const char* schema_violation = "schema_violation";
inline constexpr const char* cap_violation = "cap_violation_after_enforcement";
}  // namespace errkind

}  // namespace counselforge
