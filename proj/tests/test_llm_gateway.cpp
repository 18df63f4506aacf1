#include "madrs/errors.hpp"
#include "madrs/llm_gateway.hpp"
#include "madrs/util.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

using namespace madrs;
using namespace std::chrono_literals;

namespace {

LlmConfig fast_config() {
    LlmConfig c;
    c.backoff_initial = 1ms;
    c.request_timeout = 5000ms;
    return c;
}

// Local chat-completions stub whose handler decides each response.
class StubServer {
public:
    explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion_body(const std::string& text) {
    nlohmann::json j = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                        {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}};
    return j.dump();
}

} // namespace

TEST_CASE("mock backend answers through its policy") {
    auto gw = LlmGateway::mock([](const LlmRequest&) { return std::string("Rating: 2\nExplanation: x"); });
    auto out = gw.complete({"Rate this item.", 0, 0});
    REQUIRE(out.ok());
    CHECK(out.value().text.rfind("Rating:", 0) == 0);
    CHECK(out.value().attempt == 1);
}

TEST_CASE("oversized prompt overflows without reaching the backend") {
    std::atomic<int> calls{0};
    LlmConfig cfg = fast_config();
    cfg.max_context_tokens = 10;
    auto gw = LlmGateway::mock([&](const LlmRequest&) { ++calls; return std::string("Rating: 1"); }, cfg);
    auto out = gw.complete({std::string(41, 'x'), 0, 0});
    REQUIRE_FALSE(out.ok());
    CHECK(out.error().kind == LlmErrorKind::ContextOverflow);
    CHECK(calls == 0);
    CHECK(gw.request_log().empty());
    CHECK(gw.complete({std::string(40, 'x'), 0, 0}).ok());
}

TEST_CASE("transient mock failures are retried") {
    std::atomic<int> calls{0};
    auto gw = LlmGateway::mock(
        [&](const LlmRequest&) -> std::string {
            if (++calls < 3) throw TransientFailure("flaky");
            return "ok";
        },
        fast_config());
    auto out = gw.complete({"p", 0, 0});
    REQUIRE(out.ok());
    CHECK(out.value().attempt == 3);

    LlmConfig strict = fast_config();
    strict.max_retries = 1;
    calls = 0;
    auto gw2 = LlmGateway::mock([&](const LlmRequest&) -> std::string { ++calls; throw TransientFailure("down"); }, strict);
    auto fail = gw2.complete({"p", 0, 0});
    REQUIRE_FALSE(fail.ok());
    CHECK(fail.error().kind == LlmErrorKind::TransportError);
    CHECK(fail.error().attempts == 2);
    CHECK(calls == 2);
}

TEST_CASE("remote endpoint: two 5xx then success") {
    std::atomic<int> hits{0};
    nlohmann::json last_body;
    std::mutex m;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(m);
            last_body = nlohmann::json::parse(req.body);
        }
        if (++hits <= 2) {
            res.status = 503;
            return;
        }
        res.set_content(completion_body("Rating: 4"), "application/json");
    });
    LlmConfig cfg = fast_config();
    cfg.endpoint_url = server.url();
    cfg.model_name = "test-model";
    cfg.max_retries = 2;
    auto gw = LlmGateway::remote(cfg);
    auto out = gw.complete({"Assess.", 17, 0});
    REQUIRE(out.ok());
    CHECK(out.value().attempt == 3);
    CHECK(out.value().text == "Rating: 4");
    CHECK(out.value().prompt_tokens == 7);
    std::lock_guard lock(m);
    CHECK(last_body["model"] == "test-model");
    CHECK(last_body["messages"].size() == 1);
    CHECK(last_body["messages"][0]["role"] == "user");
    CHECK(last_body["messages"][0]["content"] == "Assess.");
    CHECK(last_body["temperature"] == 0.0);
    CHECK(last_body["max_tokens"] == 1024);
    CHECK(last_body["seed"] == 17);
}

TEST_CASE("remote endpoint: client errors are not retried") {
    std::atomic<int> hits{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
    });
    LlmConfig cfg = fast_config();
    cfg.endpoint_url = server.url();
    cfg.model_name = "m";
    auto out = LlmGateway::remote(cfg).complete({"x", 0, 0});
    REQUIRE_FALSE(out.ok());
    CHECK(out.error().kind == LlmErrorKind::EndpointError);
    CHECK(out.error().http_status == 400);
    CHECK(hits == 1);
}

TEST_CASE("remote endpoint: unreachable host is a transport error") {
    LlmConfig cfg = fast_config();
    cfg.endpoint_url = "http://127.0.0.1:1";
    cfg.model_name = "m";
    cfg.max_retries = 1;
    auto out = LlmGateway::remote(cfg).complete({"x", 0, 0});
    REQUIRE_FALSE(out.ok());
    CHECK(out.error().kind == LlmErrorKind::TransportError);
    CHECK(out.error().attempts == 2);
}

TEST_CASE("batch results keep input positions") {
    LlmConfig cfg = fast_config();
    cfg.max_context_tokens = 5;
    cfg.max_in_flight = 3;
    auto gw = LlmGateway::mock([](const LlmRequest& r) { return "echo:" + r.prompt; }, cfg);
    std::vector<LlmRequest> reqs = {{"a", 0, 0}, {std::string(100, 'b'), 0, 0}, {"c", 0, 0}};
    auto out = gw.run_batch(reqs);
    REQUIRE(out.size() == 3);
    CHECK(out[0].value().text == "echo:a");
    CHECK(out[1].error().kind == LlmErrorKind::ContextOverflow);
    CHECK(out[2].value().text == "echo:c");
}

TEST_CASE("in-flight requests never exceed the bound") {
    for (int bound : {1, 3}) {
        std::atomic<int> active{0}, peak{0};
        LlmConfig cfg = fast_config();
        cfg.max_in_flight = bound;
        auto gw = LlmGateway::mock(
            [&](const LlmRequest& r) {
                const int now = ++active;
                int prev = peak.load();
                while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
                std::this_thread::sleep_for(2ms);
                --active;
                return r.prompt;
            },
            cfg);
        std::vector<LlmRequest> reqs;
        for (int i = 0; i < 12; ++i) reqs.push_back({"p" + std::to_string(i), 0, 0});
        auto out = gw.run_batch(reqs);
        for (int i = 0; i < 12; ++i) CHECK(out[static_cast<std::size_t>(i)].value().text == "p" + std::to_string(i));
        CHECK(peak.load() <= bound);
        CHECK(peak.load() >= 1);
    }
}

TEST_CASE("audit log records one line per request") {
    const auto path = std::filesystem::temp_directory_path() / "madrs_audit_test.jsonl";
    std::filesystem::remove(path);
    auto gw = LlmGateway::mock([](const LlmRequest&) { return std::string("Rating: 0"); });
    gw.set_audit_log(path.string());
    gw.complete({"one", 1, 0});
    gw.complete({"two", 2, 1});
    const std::string text = read_file(path.string());
    const auto lines = split_lines(text);
    int n = 0;
    for (auto l : lines)
        if (!trim(l).empty()) {
            auto j = nlohmann::json::parse(l);
            CHECK(j.contains("prompt_sha256"));
            ++n;
        }
    CHECK(n == 2);
}

TEST_CASE("invalid limits are configuration errors") {
    LlmConfig cfg;
    cfg.max_in_flight = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    LlmConfig no_url;
    CHECK_THROWS_AS(LlmGateway::remote(no_url), ConfigError);
}
