#include "madrs/llm_gateway.hpp"

#include "madrs/errors.hpp"
#include "madrs/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace madrs {

std::string_view to_string(LlmErrorKind k) {
    switch (k) {
    case LlmErrorKind::ContextOverflow: return "ContextOverflow";
    case LlmErrorKind::TransportError: return "TransportError";
    case LlmErrorKind::EndpointError: return "EndpointError";
    }
    return "TransportError";
}

void LlmConfig::validate() const {
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (max_context_tokens < 1) throw ConfigError("max_context_tokens must be >= 1");
}

int estimate_tokens(std::string_view text) { return static_cast<int>((text.size() + 3) / 4); }

LlmGateway::LlmGateway(LlmConfig config, MockPolicy policy)
    : config_(std::move(config)), policy_(std::move(policy)), shared_(std::make_shared<Shared>()) {
    config_.validate();
}

LlmGateway LlmGateway::remote(LlmConfig config) {
    if (config.endpoint_url.empty()) throw ConfigError("remote backend needs an endpoint URL");
    return LlmGateway(std::move(config), nullptr);
}

LlmGateway LlmGateway::mock(MockPolicy policy, LlmConfig limits) {
    if (!policy) throw ConfigError("mock backend needs a policy");
    return LlmGateway(std::move(limits), std::move(policy));
}

std::vector<std::string> LlmGateway::request_log() const {
    std::lock_guard lock(shared_->mutex);
    return shared_->request_log;
}

void LlmGateway::clear_request_log() {
    std::lock_guard lock(shared_->mutex);
    shared_->request_log.clear();
}

void LlmGateway::set_audit_log(const std::string& path) {
    std::lock_guard lock(shared_->mutex);
    shared_->audit_path = path;
}

namespace {

struct Attempt {
    std::optional<LlmResponse> response;
    LlmError error;
    bool retryable = false;
};

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

// Splits "http://host:port/prefix" into the scheme-host-port part and the path prefix.
std::pair<std::string, std::string> split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

Attempt remote_attempt(const LlmConfig& cfg, const LlmRequest& request) {
    Attempt a;
    const auto [base, prefix] = split_endpoint(cfg.endpoint_url);
    httplib::Client client(base);
    client.set_connection_timeout(cfg.request_timeout);
    client.set_read_timeout(cfg.request_timeout);
    client.set_write_timeout(cfg.request_timeout);

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    nlohmann::json body = {
        {"model", cfg.model_name},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", cfg.temperature},
        {"max_tokens", cfg.max_output_tokens},
        {"seed", request.seed},
    };

    auto res = client.Post(prefix + "/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        a.error = {LlmErrorKind::TransportError, "request failed: " + httplib::to_string(res.error()), 0, 0};
        a.retryable = true;
        return a;
    }
    if (res->status < 200 || res->status >= 300) {
        a.error = {retryable_status(res->status) ? LlmErrorKind::TransportError : LlmErrorKind::EndpointError,
                   "HTTP " + std::to_string(res->status), 0, res->status};
        a.retryable = retryable_status(res->status);
        return a;
    }
    try {
        const auto doc = nlohmann::json::parse(res->body);
        LlmResponse r;
        r.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
            r.prompt_tokens = usage->value("prompt_tokens", 0);
            r.completion_tokens = usage->value("completion_tokens", 0);
        } else {
            r.prompt_tokens = estimate_tokens(request.prompt);
            r.completion_tokens = estimate_tokens(r.text);
        }
        a.response = std::move(r);
    } catch (const nlohmann::json::exception& e) {
        a.error = {LlmErrorKind::EndpointError, std::string("malformed completion body: ") + e.what(), 0,
                   res->status};
    }
    return a;
}

} // namespace

LlmOutcome LlmGateway::complete(const LlmRequest& request) const {
    if (request.prompt.empty()) {
        return LlmError{LlmErrorKind::EndpointError, "empty prompt", 0, 0};
    }
    if (estimate_tokens(request.prompt) > config_.max_context_tokens) {
        LlmError e{LlmErrorKind::ContextOverflow,
                   "estimated " + std::to_string(estimate_tokens(request.prompt)) + " prompt tokens exceed " +
                       std::to_string(config_.max_context_tokens),
                   0, 0};
        return e;
    }

    const int max_attempts = config_.max_retries + 1;
    LlmError last;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        {
            std::lock_guard lock(shared_->mutex);
            shared_->request_log.push_back(request.prompt);
        }
        const auto start = std::chrono::steady_clock::now();
        Attempt a;
        if (policy_) {
            try {
                LlmResponse r;
                r.text = policy_(request);
                r.prompt_tokens = estimate_tokens(request.prompt);
                r.completion_tokens = estimate_tokens(r.text);
                a.response = std::move(r);
            } catch (const TransientFailure& e) {
                a.error = {LlmErrorKind::TransportError, e.what(), 0, 0};
                a.retryable = true;
            } catch (const std::exception& e) {
                a.error = {LlmErrorKind::EndpointError, e.what(), 0, 0};
            }
        } else {
            a = remote_attempt(config_, request);
        }
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);

        if (a.response) {
            a.response->latency = latency;
            a.response->attempt = attempt;
            LlmOutcome out(std::move(*a.response));
            record_audit(request, out);
            return out;
        }
        a.error.attempts = attempt;
        last = a.error;
        if (!a.retryable) break;
        if (attempt < max_attempts) std::this_thread::sleep_for(config_.backoff_initial * (1 << (attempt - 1)));
    }
    LlmOutcome out(last);
    record_audit(request, out);
    return out;
}

std::vector<LlmOutcome> LlmGateway::run_batch(std::span<const LlmRequest> requests) const {
    std::vector<std::optional<LlmOutcome>> slots(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < requests.size(); i = next++) slots[i].emplace(complete(requests[i]));
    };
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), requests.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    std::vector<LlmOutcome> out;
    out.reserve(requests.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

void LlmGateway::record_audit(const LlmRequest& request, const LlmOutcome& outcome) const {
    std::lock_guard lock(shared_->mutex);
    if (!shared_->audit_path) return;
    nlohmann::ordered_json rec;
    rec["prompt_sha256"] = sha256_hex(request.prompt);
    rec["seed"] = request.seed;
    rec["sample"] = request.sample;
    if (outcome.ok()) {
        rec["status"] = "ok";
        rec["attempt"] = outcome.value().attempt;
        rec["latency_ms"] = outcome.value().latency.count();
        rec["prompt_tokens"] = outcome.value().prompt_tokens;
        rec["completion_tokens"] = outcome.value().completion_tokens;
    } else {
        rec["status"] = to_string(outcome.error().kind);
        rec["attempt"] = outcome.error().attempts;
        rec["message"] = outcome.error().message;
    }
    std::ofstream out(*shared_->audit_path, std::ios::app);
    out << rec.dump() << '\n';
}

} // namespace madrs
