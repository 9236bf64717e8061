#pragma once

#include <cstdlib>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "abusepipe/gateway.hpp"

namespace abusepipe {

// Generic chat-completions HTTP contract: POST {model, messages,
// temperature, max_tokens}, bearer auth read from an environment variable.
// Works for hosted APIs and locally served models alike.
struct HttpBackendConfig {
    std::string base_url;  // e.g. "https://api.example.com" or "http://localhost:8000"
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "ABUSEPIPE_API_KEY";
    int64_t context_limit = 120'000;
    int timeout_seconds = 120;
};

class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

    std::string_view name() const override { return "http"; }
    int64_t context_limit() const override { return cfg_.context_limit; }

    BackendReply complete_once(const CompletionRequest& req) override {
        nlohmann::ordered_json body;
        body["model"] = req.model_id;
        body["messages"] = nlohmann::ordered_json::array(
            {nlohmann::ordered_json{{"role", "user"}, {"content", req.prompt.text}}});
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_output_tokens;

        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        auto res = client.Post(cfg_.path, headers, body.dump(), "application/json");
        if (!res) {
            throw TransportError("http: no response from " + cfg_.base_url +
                                 " (" + httplib::to_string(res.error()) + ")");
        }
        if (res->status == 429) throw RateLimitError("http: rate limited (429)");
        if (res->status >= 500) {
            throw TransportError("http: server error " + std::to_string(res->status));
        }
        if (res->status != 200) {
            throw GatewayError("http: status " + std::to_string(res->status) + ": " + res->body);
        }

        nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
            throw TransportError("http: malformed completion response");
        }
        BackendReply reply;
        reply.raw_text = doc["choices"][0].at("message").at("content").get<std::string>();
        if (doc.contains("usage")) {
            Usage u;
            u.prompt_tokens = doc["usage"].value("prompt_tokens", int64_t{0});
            u.completion_tokens = doc["usage"].value("completion_tokens", int64_t{0});
            reply.usage = u;
        }
        return reply;
    }

private:
    HttpBackendConfig cfg_;
};

}  // namespace abusepipe
