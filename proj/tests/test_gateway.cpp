#include <doctest.h>

#include "counselforge/gateway.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <random>

using namespace counselforge;

namespace {

TemplateRegistry tiny_registry() {
    TemplateRegistry r;
    r.add("greet", "hello {{name}}, data={{payload}}");
    return r;
}

}  // namespace

TEST_CASE("template rendering binds every placeholder") {
    TemplateRegistry r = tiny_registry();
    std::map<std::string, Json> vars;
    vars["name"] = "世界";
    vars["payload"] = Json::parse(R"({"a":1})");
    CHECK(r.render("greet", vars) == "hello 世界, data={\"a\":1}");

    std::map<std::string, Json> missing;
    missing["name"] = "x";
    CHECK_THROWS_AS(r.render("greet", missing), CfError);
    CHECK_THROWS_AS(r.render("nope", vars), CfError);
}

TEST_CASE("digest is canonical over variable key order") {
    Json a = Json::object();
    a["x"] = 1;
    a["y"] = 2;
    Json b = Json::object();
    b["y"] = 2;
    b["x"] = 1;
    CHECK(canonical_json(a) != canonical_json(b));  // ordered_json preserves order
    CHECK(request_digest("t", {{"v", a}}) == request_digest("t", {{"v", b}}));
    CHECK(request_digest("t", {{"v", a}}) != request_digest("u", {{"v", a}}));
    Json c = b;
    c["z"] = 3;
    CHECK(request_digest("t", {{"v", a}}) != request_digest("t", {{"v", c}}));
}

TEST_CASE("replay provider answers logged digests only") {
    std::map<std::string, Json> vars{{"name", Json("甲")}, {"payload", Json(1)}};
    const std::string digest = request_digest("greet", vars);
    Json entry;
    entry["digest"] = digest;
    entry["raw_text"] = "回答";
    auto provider = ReplayProvider::from_jsonl(canonical_json(entry) + "\n");
    Gateway gateway(tiny_registry(), provider);

    ChatRequest req;
    req.template_id = "greet";
    req.variables = vars;
    ChatResponse resp = gateway.complete(req, accept_any_text());
    CHECK(resp.raw_text == "回答");
    CHECK(resp.attempt_count == 1);
    CHECK(resp.provider_id == "replay");

    ChatRequest miss = req;
    miss.variables["payload"] = Json(2);
    CHECK_THROWS_WITH_AS(gateway.complete(miss, accept_any_text()),
                         doctest::Contains("replay_miss"), CfError);
}

TEST_CASE("duplicate digests in a replay log are rejected") {
    Json entry;
    entry["digest"] = "abc";
    entry["raw_text"] = "x";
    const std::string line = canonical_json(entry) + "\n";
    CHECK_THROWS_AS(ReplayProvider::from_jsonl(line + line), CfError);
}

TEST_CASE("record then replay reproduces responses byte-for-byte") {
    namespace fs = std::filesystem;
    const std::string log_path =
        (fs::temp_directory_path() / "counselforge_record_test.jsonl").string();
    fs::remove(log_path);

    auto scripted = std::make_shared<ScriptedProvider>(
        "scripted", [](const RenderedRequest& req) { return "echo:" + req.digest; });
    auto recording = std::make_shared<RecordingProvider>(scripted, log_path);
    Gateway live(tiny_registry(), recording);

    ChatRequest req;
    req.template_id = "greet";
    req.variables = {{"name", Json("乙")}, {"payload", Json(7)}};
    const ChatResponse first = live.complete(req, accept_any_text());

    Gateway offline(tiny_registry(), ReplayProvider::from_file(log_path));
    const ChatResponse replayed = offline.complete(req, accept_any_text());
    CHECK(replayed.raw_text == first.raw_text);
    fs::remove(log_path);
}

TEST_CASE("validator failures retry with feedback until success") {
    auto calls = std::make_shared<std::atomic<int>>(0);
    auto flaky = std::make_shared<ScriptedProvider>("flaky", [calls](const RenderedRequest& req) {
        const int n = ++*calls;
        if (n < 3) return std::string("not json at all");
        // the retry prompt must carry the validator feedback forward
        REQUIRE(req.prompt.find("validator feedback") != std::string::npos);
        REQUIRE(req.variables.count("validator_feedback") == 1);
        return std::string(R"({"ok":true})");
    });
    Gateway gateway(tiny_registry(), flaky);
    ChatRequest req;
    req.template_id = "greet";
    req.variables = {{"name", Json("丙")}, {"payload", Json(0)}};
    req.max_retries = 3;

    auto validator = [](const std::string& raw, Json& parsed) -> std::optional<std::string> {
        Json j = Json::parse(raw, nullptr, false);
        if (j.is_discarded()) return std::string("response is not JSON");
        parsed = j;
        return std::nullopt;
    };
    const ChatResponse resp = gateway.complete(req, validator);
    CHECK(resp.attempt_count == 3);
    CHECK(*calls == 3);
}

TEST_CASE("exhausted retries raise a typed error carrying the last failure") {
    auto always_bad = std::make_shared<ScriptedProvider>(
        "bad", [](const RenderedRequest&) { return std::string("garbage"); });
    Gateway gateway(tiny_registry(), always_bad);
    ChatRequest req;
    req.template_id = "greet";
    req.variables = {{"name", Json("丁")}, {"payload", Json(0)}};
    req.max_retries = 2;
    auto validator = [](const std::string&, Json&) -> std::optional<std::string> {
        return std::string("always invalid");
    };
    try {
        gateway.complete(req, validator);
        FAIL("expected retries_exhausted");
    } catch (const CfError& e) {
        CHECK(e.kind() == errkind::retries_exhausted);
        CHECK(std::string(e.what()).find("always invalid") != std::string::npos);
    }
}

TEST_CASE("json payload extraction: fences, prose, first balanced value") {
    CHECK(extract_json_payload("```json\n{\"items\":[]}\n```") == Json::parse(R"({"items":[]})"));
    CHECK(extract_json_payload("Here is the result: {\"a\":1}") == Json::parse(R"({"a":1})"));
    CHECK(extract_json_payload("{\"a\":1} and also {\"b\":2}") == Json::parse(R"({"a":1})"));
    CHECK(extract_json_payload("[1,2,3] trailing prose") == Json::parse("[1,2,3]"));
    CHECK(extract_json_payload("{\"a\":[1,2,],}") == Json::parse(R"({"a":[1,2]})"));
    CHECK(extract_json_payload("```\n{\"fenced\": \"无语言标签\"}\n```") ==
          Json::parse(R"({"fenced":"无语言标签"})"));
    // braces inside strings do not confuse the scanner
    CHECK(extract_json_payload("say {\"s\":\"b}r{ace\"} done") ==
          Json::parse(R"({"s":"b}r{ace"})"));
}

TEST_CASE("json payload extraction failure modes") {
    CHECK_THROWS_AS(extract_json_payload("no json here"), CfError);
    try {
        extract_json_payload("prefix {\"a\": [1, 2");
        FAIL("expected unbalanced_braces");
    } catch (const CfError& e) {
        CHECK(e.kind() == errkind::unbalanced_braces);
    }
    try {
        extract_json_payload("");
        FAIL("expected no_json_found");
    } catch (const CfError& e) {
        CHECK(e.kind() == errkind::no_json_found);
    }
}

namespace {

// Brute-force oracle: first parseable span starting at the earliest opener.
std::optional<Json> oracle_first_balanced(const std::string& s) {
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '{' && s[i] != '[') continue;
        for (size_t j = i + 1; j <= s.size(); ++j) {
            Json parsed = Json::parse(s.substr(i, j - i), nullptr, false);
            if (!parsed.is_discarded()) return parsed;
        }
    }
    return std::nullopt;
}

Json random_json(std::mt19937_64& rng, int depth) {
    const std::vector<std::string> words = {"你好", "value", "含 空格", "x\"y", "末尾。"};
    switch (rng() % (depth > 0 ? 6 : 3)) {
        case 0: return Json(static_cast<long long>(rng() % 1000));
        case 1: return Json(words[rng() % words.size()]);
        case 2: return Json(rng() % 2 == 0);
        case 3: {
            Json arr = Json::array();
            const size_t n = rng() % 4;
            for (size_t i = 0; i < n; ++i) arr.push_back(random_json(rng, depth - 1));
            return arr;
        }
        default: {
            Json obj = Json::object();
            const size_t n = rng() % 4;
            for (size_t i = 0; i < n; ++i)
                obj["k" + std::to_string(rng() % 8)] = random_json(rng, depth - 1);
            return obj;
        }
    }
}

}  // namespace

TEST_CASE("property: extraction of embedded values matches the balanced-span oracle") {
    std::mt19937_64 rng(177);
    for (int i = 0; i < 200; ++i) {
        Json v = random_json(rng, 3);
        if (!v.is_object() && !v.is_array()) continue;
        const std::string embedded = "前缀说明 " + canonical_json(v) + " 后缀 {未闭合";
        auto expected = oracle_first_balanced(embedded);
        REQUIRE(expected.has_value());
        CHECK(extract_json_payload(embedded) == *expected);
    }
}

TEST_CASE("property: extraction round-trips any serialized JSON value") {
    std::mt19937_64 rng(271828);
    for (int i = 0; i < 300; ++i) {
        Json v = random_json(rng, 3);
        CHECK(extract_json_payload(canonical_json(v)) == v);
    }
    CHECK(extract_json_payload("42") == Json(42));
    CHECK(extract_json_payload("\"just a string\"") == Json("just a string"));
    CHECK(extract_json_payload("null").is_null());
}
