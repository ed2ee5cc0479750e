#pragma once

#include <string>

#include "triage/llm_gateway.hpp"

namespace triage {

/// OpenAI-compatible chat-completions client ("<base_url>/chat/completions").
class HttpChatBackend : public ChatBackend {
public:
    /// `base_url` like "https://api.openai.com/v1" or "http://127.0.0.1:8080".
    HttpChatBackend(std::string base_url, std::string api_key, int timeout_seconds = 600);

    /// Reads the endpoint and key from the named environment variables.
    static HttpChatBackend from_environment(const std::string& base_url_env, const std::string& api_key_env);

    BackendReply send(const std::vector<ChatMessage>& messages, const ModelConfig& config,
                      const RequestTag& tag) override;

private:
    std::string origin_;  // scheme://host[:port]
    std::string path_prefix_;
    std::string api_key_;
    int timeout_seconds_;
};

}  // namespace triage
