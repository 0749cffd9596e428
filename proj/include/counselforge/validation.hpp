#pragma once

#include "counselforge/jsonio.hpp"

#include <string>
#include <utility>
#include <vector>

namespace counselforge {

struct Violation {
    std::string path;
    std::string rule;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }

    void add(std::string path, std::string rule, std::string detail = {}) {
        violations.push_back({std::move(path), std::move(rule), std::move(detail)});
    }

    void merge(const ValidationReport& other) {
        violations.insert(violations.end(), other.violations.begin(), other.violations.end());
    }

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& v : violations) {
            Json e;
            e["path"] = v.path;
            e["rule"] = v.rule;
            e["detail"] = v.detail;
            arr.push_back(std::move(e));
        }
        return arr;
    }

    std::string summary() const {
        std::string s;
        for (const auto& v : violations) {
            if (!s.empty()) s += "; ";
            s += v.path + ": " + v.rule;
            if (!v.detail.empty()) s += " (" + v.detail + ")";
        }
        return s;
    }
};

}  // namespace counselforge
