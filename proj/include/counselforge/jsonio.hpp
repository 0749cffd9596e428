#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace counselforge {

// Insertion-ordered JSON everywhere: canonical serialization depends on the
// order in which serializers emit keys.
using Json = nlohmann::ordered_json;

// Canonical byte form: compact UTF-8, no trailing whitespace, keys in the
// order the serializer inserted them.
inline std::string canonical_json(const Json& j) { return j.dump(); }

// Pretty form used for files written for humans (reports, artifacts).
inline std::string pretty_json(const Json& j) { return j.dump(2); }

// Key-order-insensitive digest input: re-emit with keys sorted at every level.
inline Json sort_keys(const Json& j) {
    if (j.is_object()) {
        std::vector<std::string> keys;
        for (const auto& [k, v] : j.items()) keys.push_back(k);
        std::sort(keys.begin(), keys.end());
        Json out = Json::object();
        for (const auto& k : keys) out[k] = sort_keys(j.at(k));
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(sort_keys(v));
        return out;
    }
    return j;
}

// FNV-1a 64-bit over a canonical byte string, rendered as 16 hex chars.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace counselforge
