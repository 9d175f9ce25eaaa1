#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace t2s {

// Transport/API failure from a provider. Retryable covers timeouts,
// rate limits, and 5xx responses.
class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& message, bool retryable)
        : std::runtime_error(message), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

struct ProviderConfig {
    std::string kind = "http"; // http | stub-echo | stub-rewrite
    std::string endpoint = "https://api.openai.com/v1";
    std::string model = "gpt-3.5-turbo-0301";
    double timeout_s = 30.0;
    int max_retries = 3;
    int max_parallel = 4;
    double temperature = 1.0;

    void validate() const; // throws Usage on bad values
    nlohmann::json to_json() const;
    static ProviderConfig from_json(const nlohmann::json& j);
    static ProviderConfig from_json(const nlohmann::json& j, const ProviderConfig& base);
};

struct EmbeddingConfig {
    std::string kind = "hash"; // hash | http
    std::string endpoint = "https://api.openai.com/v1";
    std::string model;
    double timeout_s = 30.0;
    int max_retries = 3;
    int batch_size = 64;

    void validate() const;
    nlohmann::json to_json() const;
    static EmbeddingConfig from_json(const nlohmann::json& j);
    static EmbeddingConfig from_json(const nlohmann::json& j, const EmbeddingConfig& base);
};

class TextGenProvider {
public:
    virtual ~TextGenProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string generate(const std::string& prompt) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

// Wraps an arbitrary callback; the unit tests build flaky/scripted providers
// out of this.
class CallbackProvider : public TextGenProvider {
public:
    using Fn = std::function<std::string(const std::string&)>;
    CallbackProvider(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string name() const override { return name_; }
    std::string generate(const std::string& prompt) override { return fn_(prompt); }

private:
    std::string name_;
    Fn fn_;
};

// Recovers the question from a rendered instruction prompt by matching the
// known templates. Returns nullopt for unrecognized prompts.
std::optional<std::string> question_from_prompt(const std::string& prompt);

// Offline stub: answers with the question itself (always a duplicate).
std::unique_ptr<TextGenProvider> make_echo_stub();

// Offline stub: answers with a per-instruction rewording of the question,
// deterministic in the prompt bytes.
std::unique_ptr<TextGenProvider> make_rewrite_stub();

// Deterministic bag-of-words embedder with signed feature hashing.
std::unique_ptr<EmbeddingProvider> make_hash_embedder(size_t dimension = 256);

// OpenAI-compatible chat-completions client. API key comes from the
// T2S_API_KEY (or OPENAI_API_KEY) environment variable.
std::unique_ptr<TextGenProvider> make_http_generator(const ProviderConfig& cfg);
std::unique_ptr<EmbeddingProvider> make_http_embedder(const EmbeddingConfig& cfg);

std::unique_ptr<TextGenProvider> make_generator(const ProviderConfig& cfg);
std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingConfig& cfg);

// Runs fn with exponential backoff on retryable ProviderErrors; rethrows as
// ProviderUnavailable (t2s::Error) once attempts are exhausted.
std::string call_with_retry(TextGenProvider& provider, const std::string& prompt,
                            int max_retries, int backoff_base_ms = 250);

} // namespace t2s
