#pragma once
// Live providers: a chat-completion client for the gateway and an embedding
// client for the encoder interface. Both speak the common JSON wire shape
// (POST {model, messages|input, ...}) and read the bearer credential from a
// named environment variable so no secret ever passes through flags.
//
// This header pulls in cpp-httplib; include it only where a live endpoint is
// actually used. The scripted stub keeps every test and the acceptance suite
// network-free.

#include "hiermem/embedding.hpp"
#include "hiermem/gateway.hpp"

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

namespace hiermem {

struct HttpProviderConfig {
    std::string base_url = "http://localhost:8080"; // scheme://host[:port]
    std::string chat_path = "/v1/chat/completions";
    std::string embeddings_path = "/v1/embeddings";
    std::string model = "gpt-4o-mini";
    std::string credential_env = "HIERMEM_API_KEY"; // env var holding the bearer token
    double temperature = 0.0;
    int timeout_seconds = 60;
};

namespace http_detail {

inline std::unique_ptr<httplib::Client> make_client(const HttpProviderConfig& cfg) {
    auto client = std::make_unique<httplib::Client>(cfg.base_url);
    client->set_connection_timeout(cfg.timeout_seconds, 0);
    client->set_read_timeout(cfg.timeout_seconds, 0);
    const char* token = std::getenv(cfg.credential_env.c_str());
    if (token && *token) {
        client->set_bearer_token_auth(token);
    }
    return client;
}

} // namespace http_detail

class HttpChatProvider : public Provider {
public:
    explicit HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {}

    std::string name() const override { return "http:" + config_.model; }

    ProviderResponse complete(const StructuredRequest& request) override {
        const json body = {
            {"model", config_.model},
            {"messages", json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})},
            {"temperature", config_.temperature},
        };
        auto client = http_detail::make_client(config_);
        auto result = client->Post(config_.chat_path, body.dump(), "application/json");
        if (!result) {
            throw ProviderError("chat endpoint unreachable: " +
                                httplib::to_string(result.error()));
        }
        if (result->status != 200) {
            throw ProviderError("chat endpoint returned status " +
                                std::to_string(result->status) + ": " + result->body);
        }
        json parsed;
        try {
            parsed = json::parse(result->body);
        } catch (const json::parse_error& e) {
            throw ProviderError(std::string("chat endpoint returned invalid JSON: ") + e.what());
        }
        ProviderResponse resp;
        try {
            resp.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw ProviderError("chat response missing choices[0].message.content");
        }
        if (parsed.contains("usage")) {
            resp.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0ULL);
            resp.usage.completion_tokens = parsed["usage"].value("completion_tokens", 0ULL);
        } else {
            resp.usage.prompt_tokens = approx_token_count(request.rendered_prompt);
            resp.usage.completion_tokens = approx_token_count(resp.text);
        }
        return resp;
    }

private:
    HttpProviderConfig config_;
};

// Remote embedding endpoint behind the Encoder interface. Out of the
// acceptance path; the hashed encoder covers all tests.
class HttpEncoder : public Encoder {
public:
    HttpEncoder(HttpProviderConfig config, size_t dimension)
        : config_(std::move(config)), dimension_(dimension) {}

    size_t dimension() const override { return dimension_; }

    Vec encode(const std::string& text) const override {
        const json body = {{"model", config_.model}, {"input", text}};
        auto client = http_detail::make_client(config_);
        auto result = client->Post(config_.embeddings_path, body.dump(), "application/json");
        if (!result) {
            throw ProviderError("embedding endpoint unreachable: " +
                                httplib::to_string(result.error()));
        }
        if (result->status != 200) {
            throw ProviderError("embedding endpoint returned status " +
                                std::to_string(result->status));
        }
        json parsed;
        try {
            parsed = json::parse(result->body);
        } catch (const json::parse_error& e) {
            throw ProviderError(std::string("embedding endpoint returned invalid JSON: ") +
                                e.what());
        }
        Vec v;
        try {
            for (const auto& x : parsed.at("data").at(0).at("embedding")) {
                v.push_back(x.get<float>());
            }
        } catch (const json::exception&) {
            throw ProviderError("embedding response missing data[0].embedding");
        }
        if (v.size() != dimension_) {
            throw DimensionMismatchError("embedding endpoint returned dimension " +
                                         std::to_string(v.size()) + ", expected " +
                                         std::to_string(dimension_));
        }
        return v;
    }

private:
    HttpProviderConfig config_;
    size_t dimension_;
};

} // namespace hiermem
