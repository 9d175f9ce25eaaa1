#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "t2s/provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "t2s/augment.hpp"
#include "t2s/error.hpp"
#include "t2s/util.hpp"

namespace t2s {

using nlohmann::json;

void ProviderConfig::validate() const {
    if (timeout_s <= 0) fail(Errc::Usage, "provider timeout must be positive");
    if (max_retries < 0) fail(Errc::Usage, "max retries must be >= 0");
    if (max_parallel < 1) fail(Errc::Usage, "max parallel requests must be >= 1");
}

json ProviderConfig::to_json() const {
    return json{{"kind", kind},           {"endpoint", endpoint},
                {"model", model},         {"timeout_s", timeout_s},
                {"max_retries", max_retries}, {"max_parallel", max_parallel},
                {"temperature", temperature}};
}

ProviderConfig ProviderConfig::from_json(const json& j) {
    return from_json(j, ProviderConfig{});
}

ProviderConfig ProviderConfig::from_json(const json& j, const ProviderConfig& base) {
    ProviderConfig cfg = base;
    cfg.kind = j.value("kind", cfg.kind);
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.max_parallel = j.value("max_parallel", cfg.max_parallel);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.validate();
    return cfg;
}

void EmbeddingConfig::validate() const {
    if (timeout_s <= 0) fail(Errc::Usage, "embedding timeout must be positive");
    if (max_retries < 0) fail(Errc::Usage, "max retries must be >= 0");
    if (batch_size < 1) fail(Errc::Usage, "batch size must be >= 1");
}

json EmbeddingConfig::to_json() const {
    return json{{"kind", kind},   {"endpoint", endpoint},       {"model", model},
                {"timeout_s", timeout_s}, {"max_retries", max_retries}, {"batch_size", batch_size}};
}

EmbeddingConfig EmbeddingConfig::from_json(const json& j) {
    return from_json(j, EmbeddingConfig{});
}

EmbeddingConfig EmbeddingConfig::from_json(const json& j, const EmbeddingConfig& base) {
    EmbeddingConfig cfg = base;
    cfg.kind = j.value("kind", cfg.kind);
    cfg.endpoint = j.value("endpoint", cfg.endpoint);
    cfg.model = j.value("model", cfg.model);
    cfg.timeout_s = j.value("timeout_s", cfg.timeout_s);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.validate();
    return cfg;
}

std::optional<std::string> question_from_prompt(const std::string& prompt) {
    for (InstructionKind kind : kAllInstructionKinds) {
        const std::string& tmpl = prompt_template(kind);
        size_t slot = tmpl.find("{Q}");
        std::string pre = tmpl.substr(0, slot);
        std::string post = tmpl.substr(slot + 3);
        if (prompt.size() < pre.size() + post.size()) continue;
        if (prompt.compare(0, pre.size(), pre) != 0) continue;
        if (!post.empty() &&
            prompt.compare(prompt.size() - post.size(), post.size(), post) != 0) {
            continue;
        }
        return prompt.substr(pre.size(), prompt.size() - pre.size() - post.size());
    }
    return std::nullopt;
}

namespace {

std::optional<InstructionKind> kind_from_prompt(const std::string& prompt) {
    for (InstructionKind kind : kAllInstructionKinds) {
        const std::string& tmpl = prompt_template(kind);
        size_t slot = tmpl.find("{Q}");
        std::string pre = tmpl.substr(0, slot);
        if (prompt.compare(0, pre.size(), pre) == 0) return kind;
    }
    return std::nullopt;
}

// Zero-shot prompts end with "### <question> Return only a SQL query.\nSELECT".
std::optional<std::string> question_from_zeroshot_prompt(const std::string& prompt) {
    const std::string tail = " Return only a SQL query.\nSELECT";
    if (prompt.size() < tail.size() ||
        prompt.compare(prompt.size() - tail.size(), tail.size(), tail) != 0) {
        return std::nullopt;
    }
    size_t line = prompt.rfind("### ", prompt.size() - tail.size());
    if (line == std::string::npos) return std::nullopt;
    size_t begin = line + 4;
    return prompt.substr(begin, prompt.size() - tail.size() - begin);
}

class EchoStub : public TextGenProvider {
public:
    std::string name() const override { return "stub-echo"; }
    std::string generate(const std::string& prompt) override {
        if (auto q = question_from_prompt(prompt)) return *q;
        if (auto q = question_from_zeroshot_prompt(prompt)) return *q;
        throw ProviderError("stub-echo: unrecognized prompt", false);
    }
};

class RewriteStub : public TextGenProvider {
public:
    std::string name() const override { return "stub-rewrite"; }
    std::string generate(const std::string& prompt) override {
        auto q = question_from_prompt(prompt);
        auto kind = kind_from_prompt(prompt);
        if (!q || !kind) throw ProviderError("stub-rewrite: unrecognized prompt", false);
        switch (*kind) {
            case InstructionKind::Simplify: return "Simply put: " + *q;
            case InstructionKind::HideDetails: return "In short: " + *q;
            case InstructionKind::Synonyms: return "In other terms: " + *q;
            case InstructionKind::Substitutions: return "Put another way: " + *q;
            case InstructionKind::ExpressDifferently:
                return "1. Expressed differently: " + *q + "\n2. Yet another phrasing: " + *q;
            case InstructionKind::FromExamples: return "To keep it brief: " + *q;
            case InstructionKind::Paraphrase: return "Rephrased: " + *q;
        }
        throw ProviderError("stub-rewrite: unknown kind", false);
    }
};

class HashEmbedder : public EmbeddingProvider {
public:
    explicit HashEmbedder(size_t dimension) : dimension_(dimension) {}
    std::string name() const override { return "hash-bow"; }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(embed_one(text));
        return out;
    }

private:
    std::vector<double> embed_one(const std::string& text) const {
        std::vector<double> v(dimension_, 0.0);
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            std::uint64_t h = util::fnv1a64(token);
            size_t idx = static_cast<size_t>(h % dimension_);
            double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
            v[idx] += sign;
            token.clear();
        };
        for (char c : text) {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                token.push_back(
                    static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            } else {
                flush();
            }
        }
        flush();
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm == 0.0) {
            v[0] = 1.0; // tokenless text maps to a fixed unit vector
            return v;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return v;
    }

    size_t dimension_;
};

std::string api_key_from_env() {
    if (const char* k = std::getenv("T2S_API_KEY")) return k;
    if (const char* k = std::getenv("OPENAI_API_KEY")) return k;
    throw ProviderError("no API key: set T2S_API_KEY or OPENAI_API_KEY", false);
}

// "https://host[:port]/prefix" -> (base, prefix)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ProviderError("bad endpoint (missing scheme): " + endpoint, false);
    }
    size_t path = endpoint.find('/', scheme + 3);
    if (path == std::string::npos) return {endpoint, ""};
    std::string prefix = endpoint.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {endpoint.substr(0, path), prefix};
}

json post_json(const std::string& endpoint, const std::string& route, const json& body,
               double timeout_s) {
    auto [base, prefix] = split_endpoint(endpoint);
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int64_t>(timeout_s * 1000)));
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_from_env()}};
    auto res = client.Post(prefix + route, headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("request to " + base + route + " failed: " +
                                httplib::to_string(res.error()),
                            true);
    }
    if (res->status == 429 || res->status >= 500) {
        throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, true);
    }
    if (res->status != 200) {
        throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
    }
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw ProviderError(std::string("bad JSON in response: ") + e.what(), false);
    }
}

class HttpGenerator : public TextGenProvider {
public:
    explicit HttpGenerator(ProviderConfig cfg) : cfg_(std::move(cfg)) {}
    std::string name() const override { return "http:" + cfg_.model; }

    std::string generate(const std::string& prompt) override {
        json body{{"model", cfg_.model},
                  {"temperature", cfg_.temperature},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
        json res = post_json(cfg_.endpoint, "/chat/completions", body, cfg_.timeout_s);
        try {
            return res.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError(std::string("unexpected completion shape: ") + e.what(), false);
        }
    }

private:
    ProviderConfig cfg_;
};

class HttpEmbedder : public EmbeddingProvider {
public:
    explicit HttpEmbedder(EmbeddingConfig cfg) : cfg_(std::move(cfg)) {}
    std::string name() const override { return "http:" + cfg_.model; }

    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
        json body{{"model", cfg_.model}, {"input", texts}};
        json res = post_json(cfg_.endpoint, "/embeddings", body, cfg_.timeout_s);
        std::vector<std::vector<double>> out(texts.size());
        try {
            for (const auto& item : res.at("data")) {
                size_t idx = item.at("index").get<size_t>();
                out.at(idx) = item.at("embedding").get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw ProviderError(std::string("unexpected embedding shape: ") + e.what(), false);
        }
        return out;
    }

private:
    EmbeddingConfig cfg_;
};

} // namespace

std::unique_ptr<TextGenProvider> make_echo_stub() {
    return std::make_unique<EchoStub>();
}

std::unique_ptr<TextGenProvider> make_rewrite_stub() {
    return std::make_unique<RewriteStub>();
}

std::unique_ptr<EmbeddingProvider> make_hash_embedder(size_t dimension) {
    return std::make_unique<HashEmbedder>(dimension);
}

std::unique_ptr<TextGenProvider> make_http_generator(const ProviderConfig& cfg) {
    return std::make_unique<HttpGenerator>(cfg);
}

std::unique_ptr<EmbeddingProvider> make_http_embedder(const EmbeddingConfig& cfg) {
    return std::make_unique<HttpEmbedder>(cfg);
}

std::unique_ptr<TextGenProvider> make_generator(const ProviderConfig& cfg) {
    cfg.validate();
    if (cfg.kind == "http") return make_http_generator(cfg);
    if (cfg.kind == "stub-echo") return make_echo_stub();
    if (cfg.kind == "stub-rewrite") return make_rewrite_stub();
    fail(Errc::Usage, "unknown generation provider kind: " + cfg.kind);
}

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbeddingConfig& cfg) {
    cfg.validate();
    if (cfg.kind == "hash") return make_hash_embedder();
    if (cfg.kind == "http") return make_http_embedder(cfg);
    fail(Errc::Usage, "unknown embedding provider kind: " + cfg.kind);
}

std::string call_with_retry(TextGenProvider& provider, const std::string& prompt,
                            int max_retries, int backoff_base_ms) {
    int attempt = 0;
    for (;;) {
        try {
            return provider.generate(prompt);
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= max_retries) {
                fail(Errc::ProviderUnavailable,
                     provider.name() + " after " + std::to_string(attempt + 1) +
                         " attempt(s): " + e.what());
            }
            auto delay = std::chrono::milliseconds(
                static_cast<int64_t>(backoff_base_ms) << std::min(attempt, 10));
            std::this_thread::sleep_for(delay);
            ++attempt;
        }
    }
}

} // namespace t2s
