#include "triage/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "triage/error.hpp"

namespace triage {
using nlohmann::json;

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key, int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    while (!base_url.empty() && base_url.back() == '/') base_url.pop_back();
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw Error("provider base URL needs a scheme: " + base_url);
    const auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string{} : base_url.substr(path_start);
}

HttpChatBackend HttpChatBackend::from_environment(const std::string& base_url_env, const std::string& api_key_env) {
    const char* base = std::getenv(base_url_env.c_str());
    const char* key = std::getenv(api_key_env.c_str());
    if (key == nullptr || *key == '\0') throw Error("environment variable " + api_key_env + " is not set");
    return HttpChatBackend(base != nullptr && *base != '\0' ? base : "https://api.openai.com/v1", key);
}

BackendReply HttpChatBackend::send(const std::vector<ChatMessage>& messages, const ModelConfig& config,
                                   const RequestTag&) {
    json body;
    body["model"] = config.model_id;
    body["temperature"] = config.temperature;
    body["max_tokens"] = config.max_tokens;
    for (const auto& m : messages) body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransportError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
        throw TransportError("provider returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw Error("provider returned HTTP " + std::to_string(res->status) + ": " + res->body);

    try {
        const json reply = json::parse(res->body);
        BackendReply out;
        out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto usage = reply.find("usage"); usage != reply.end()) {
            out.prompt_tokens = usage->value("prompt_tokens", 0);
            out.completion_tokens = usage->value("completion_tokens", 0);
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed provider response: ") + e.what());
    }
}

}  // namespace triage
