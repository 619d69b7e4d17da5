#pragma once

// Chat-completion backends. Every model role in the pipeline (online model,
// reference generator, augmentation generator, consistency checker) is one
// BackendConfig: either an OpenAI-compatible HTTP endpoint or a scripted mock.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fcdata/corpus.hpp"
#include "fcdata/error.hpp"
#include "fcdata/parallel.hpp"

namespace fcdata {

struct ChatRequest {
    std::string system;
    std::string user;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string model;  // empty: use the backend's configured model
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{500};
};

enum class BackendKind { Http, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint;  // full URL, e.g. http://localhost:8000/v1/chat/completions
    std::string auth_env;  // name of the env var holding the bearer token; empty for none
    std::string model;
    std::string script;    // mock script path
    RetryPolicy retry;
    std::chrono::seconds timeout{120};

    void validate() const {
        if (kind == BackendKind::Http && endpoint.empty()) {
            throw Error(ErrorCode::InvalidConfig, "http backend needs an endpoint");
        }
        if (kind == BackendKind::Mock && script.empty()) {
            throw Error(ErrorCode::InvalidConfig, "mock backend needs a script");
        }
        if (retry.max_attempts < 1) throw Error(ErrorCode::InvalidConfig, "retry.max_attempts must be >= 1");
    }

    /// Relative script paths resolve against `base_dir`.
    static BackendConfig from_json(const json& j, const std::filesystem::path& base_dir = {}) {
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "backend config must be an object");
        BackendConfig cfg;
        const std::string kind = j.value("kind", "mock");
        if (kind == "http") cfg.kind = BackendKind::Http;
        else if (kind == "mock") cfg.kind = BackendKind::Mock;
        else throw Error(ErrorCode::InvalidConfig, "unknown backend kind '" + kind + "'");
        cfg.endpoint = j.value("endpoint", "");
        cfg.auth_env = j.value("auth_env", "");
        cfg.model = j.value("model", "");
        if (j.contains("script")) {
            std::filesystem::path p = j.at("script").get<std::string>();
            cfg.script = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
        }
        if (auto r = j.find("retry"); r != j.end()) {
            cfg.retry.max_attempts = r->value("max_attempts", cfg.retry.max_attempts);
            cfg.retry.backoff_base = std::chrono::milliseconds(r->value("backoff_ms", 500));
        }
        cfg.timeout = std::chrono::seconds(j.value("timeout_s", 120));
        cfg.validate();
        return cfg;
    }
};

/// Implementations are safe to call from several threads at once.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct ScriptEntry {
    std::optional<std::string> match;  // substring of the user text
    std::string response;
    bool repeat = false;  // entry is never consumed
    bool fail = false;    // simulate a transport failure
};

/// Entry selection: the first unconsumed entry whose `match` occurs in the user
/// text; failing that, the first unconsumed entry without a `match`. The same
/// script and request sequence always yields the same responses.
class MockChatBackend : public ChatBackend {
public:
    explicit MockChatBackend(std::vector<ScriptEntry> script)
        : script_(std::move(script)), consumed_(script_.size(), false) {}

    static std::vector<ScriptEntry> parse_script(const json& j) {
        if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, "mock script must be a JSON list");
        std::vector<ScriptEntry> entries;
        for (const auto& e : j) {
            ScriptEntry s;
            if (e.is_string()) {
                s.response = e.get<std::string>();
            } else if (e.is_object()) {
                if (auto m = e.find("match"); m != e.end() && !m->is_null()) s.match = m->get<std::string>();
                s.response = e.value("response", "");
                s.repeat = e.value("repeat", false);
                s.fail = e.value("fail", false);
            } else {
                throw Error(ErrorCode::InvalidConfig, "mock script entries must be strings or objects");
            }
            entries.push_back(std::move(s));
        }
        return entries;
    }

    static std::unique_ptr<MockChatBackend> from_file(const std::string& path) {
        json j;
        try {
            j = json::parse(read_text(path));
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::InvalidConfig, path + ": " + e.what());
        }
        return std::make_unique<MockChatBackend>(parse_script(j));
    }

    std::string complete(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        ++calls_;
        auto pick = [&](bool want_match) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < script_.size(); ++i) {
                if (consumed_[i] || script_[i].match.has_value() != want_match) continue;
                if (want_match && req.user.find(*script_[i].match) == std::string::npos) continue;
                return i;
            }
            return std::nullopt;
        };
        auto idx = pick(true);
        if (!idx) idx = pick(false);
        if (!idx) throw Error(ErrorCode::ScriptExhausted, "no script entry left for request #" + std::to_string(calls_));
        const ScriptEntry& e = script_[*idx];
        if (!e.repeat) consumed_[*idx] = true;
        if (e.fail) throw Error(ErrorCode::BackendUnavailable, "scripted failure");
        return e.response;
    }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }

private:
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    std::size_t calls_ = 0;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// HTTP transport

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint '" + url + "' has no scheme");
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

inline bool retryable_status(int status) { return status == 429 || status >= 500; }

/// POSTs `body` as JSON, retrying transport errors, 429 and 5xx with
/// exponential backoff plus jitter. Never logs or echoes the credential.
inline json post_json_with_retry(const BackendConfig& cfg, const json& body) {
    httplib::Headers headers;
    if (!cfg.auth_env.empty()) {
        const char* key = std::getenv(cfg.auth_env.c_str());
        if (!key || !*key) throw Error(ErrorCode::AuthMissing, "environment variable " + cfg.auth_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto [origin, path] = split_url(cfg.endpoint);
    httplib::Client client(origin);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);

    thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt < cfg.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            const auto base = cfg.retry.backoff_base * (1LL << (attempt - 1));
            std::uniform_int_distribution<long long> jitter(0, std::max<long long>(cfg.retry.backoff_base.count(), 0));
            std::this_thread::sleep_for(base + std::chrono::milliseconds(jitter(jitter_rng)));
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            auto parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) throw Error(ErrorCode::BackendUnavailable, origin + " returned a non-JSON body");
            return parsed;
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (!retryable_status(res->status)) break;
    }
    throw Error(ErrorCode::BackendUnavailable, origin + path + ": " + last_error + " after " +
                                                   std::to_string(cfg.retry.max_attempts) + " attempt(s)");
}

}  // namespace detail

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    std::string complete(const ChatRequest& req) override {
        if (req.user.empty()) throw Error(ErrorCode::InvalidArgument, "chat request has an empty user message");
        json messages = json::array();
        if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
        messages.push_back({{"role", "user"}, {"content", req.user}});
        const json body{{"model", req.model.empty() ? cfg_.model : req.model},
                        {"messages", std::move(messages)},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens}};
        const json resp = detail::post_json_with_retry(cfg_, body);
        try {
            return resp.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::BackendUnavailable, "response has no choices[0].message.content");
        }
    }

private:
    BackendConfig cfg_;
};

inline std::unique_ptr<ChatBackend> make_chat_backend(const BackendConfig& cfg) {
    cfg.validate();
    if (cfg.kind == BackendKind::Mock) return MockChatBackend::from_file(cfg.script);
    return std::make_unique<HttpChatBackend>(cfg);
}

// ---------------------------------------------------------------------------
// Fan-out

struct Completion {
    std::string text;
    std::optional<ErrorCode> error;
    std::string message;

    bool ok() const noexcept { return !error.has_value(); }
};

/// Order-preserving; at most `parallelism` requests in flight; failures are
/// reported per item.
inline std::vector<Completion> complete_many(ChatBackend& backend, std::span<const ChatRequest> reqs,
                                             std::size_t parallelism) {
    if (parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
    std::vector<Completion> out(reqs.size());
    bounded_for_each(reqs.size(), parallelism, [&](std::size_t i) {
        try {
            out[i].text = backend.complete(reqs[i]);
        } catch (const Error& e) {
            out[i].error = e.code();
            out[i].message = e.what();
        } catch (const std::exception& e) {
            out[i].error = ErrorCode::BackendUnavailable;
            out[i].message = e.what();
        }
    });
    return out;
}

}  // namespace fcdata
