#pragma once

#include "madrs/result.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace madrs {

struct LlmConfig {
    std::string endpoint_url;
    std::string model_name;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    int max_context_tokens = 128000;
    std::chrono::milliseconds request_timeout{120000};
    int max_retries = 3;
    int max_in_flight = 4;
    /// First retry delay; doubles on every further attempt.
    std::chrono::milliseconds backoff_initial{500};
    /// Environment variable holding a bearer token; unset means no auth header.
    std::string api_key_env = "MADRS_API_KEY";

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// One independent completion request. `seed` and `sample` are forwarded to
/// the backend so repeated runs and parse retries can draw distinct samples.
struct LlmRequest {
    std::string prompt;
    std::uint64_t seed = 0;
    int sample = 0;
};

struct LlmResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::chrono::milliseconds latency{0};
    int attempt = 1;
};

enum class LlmErrorKind { ContextOverflow, TransportError, EndpointError };

std::string_view to_string(LlmErrorKind k);

struct LlmError {
    LlmErrorKind kind = LlmErrorKind::TransportError;
    std::string message;
    int attempts = 0;
    int http_status = 0;
};

using LlmOutcome = Result<LlmResponse, LlmError>;

/// Thrown by a mock policy to simulate a retryable transport failure.
class TransientFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using MockPolicy = std::function<std::string(const LlmRequest&)>;

/// Characters / 4, rounded up.
int estimate_tokens(std::string_view text);

/// Chat-completions client with retries and bounded concurrency. Either talks
/// to an OpenAI-compatible endpoint or answers through an in-process mock
/// policy. Safe to call from several threads.
class LlmGateway {
public:
    static LlmGateway remote(LlmConfig config);
    static LlmGateway mock(MockPolicy policy, LlmConfig limits = {});

    bool is_mock() const { return static_cast<bool>(policy_); }
    const LlmConfig& config() const { return config_; }

    LlmOutcome complete(const LlmRequest& request) const;

    /// Results are positionally aligned with `requests`; at most
    /// config().max_in_flight requests are outstanding at once.
    std::vector<LlmOutcome> run_batch(std::span<const LlmRequest> requests) const;

    /// Prompts handed to the backend, in dispatch order (one entry per attempt).
    std::vector<std::string> request_log() const;
    void clear_request_log();

    /// Appends one JSONL audit record per completed request.
    void set_audit_log(const std::string& path);

private:
    LlmGateway(LlmConfig config, MockPolicy policy);

    void record_audit(const LlmRequest& request, const LlmOutcome& outcome) const;

    struct Shared {
        std::mutex mutex;
        std::vector<std::string> request_log;
        std::optional<std::string> audit_path;
    };

    LlmConfig config_;
    MockPolicy policy_;
    std::shared_ptr<Shared> shared_;
};

} // namespace madrs
