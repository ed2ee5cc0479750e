#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace triage {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

/// Ordered chat history. Roles alternate user/assistant after an optional
/// leading system message; appends that would break this throw.
class Conversation {
public:
    Conversation() = default;
    explicit Conversation(std::string system_prompt);

    void add_user(std::string content);
    void add_assistant(std::string content);

    const std::vector<ChatMessage>& messages() const noexcept { return messages_; }
    size_t size() const noexcept { return messages_.size(); }
    bool empty() const noexcept { return messages_.empty(); }
    const ChatMessage& back() const { return messages_.back(); }

private:
    void append(Role role, std::string content);

    std::vector<ChatMessage> messages_;
};

struct ModelConfig {
    std::string model_id = "o3-mini-2025-01-31";
    double temperature = 0.0;
    int max_tokens = 8192;
    int vote_count = 3;

    /// Throws Error when a field is out of range or vote_count is even.
    void validate() const;
};

/// Identifies which pipeline step issued a request.
struct RequestTag {
    std::string case_id;
    std::string stage;
    int vote_index = 0;
};

struct TranscriptRecord {
    std::string case_id;
    std::string stage;
    int vote_index = 0;
    std::string model_id;
    std::string request_hash;
    std::vector<ChatMessage> messages;
    std::string response;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    double wall_time_ms = 0.0;

    bool operator==(const TranscriptRecord&) const = default;
};

nlohmann::json to_json(const TranscriptRecord& record);
TranscriptRecord transcript_from_json(const nlohmann::json& j);

/// SHA-256 over the model id and the serialized messages. Sampling
/// parameters are not part of the digest.
std::string request_hash(std::string_view model_id, const std::vector<ChatMessage>& messages);

/// Append-only JSON-lines transcript log with lookup by (hash, vote index).
class TranscriptStore {
public:
    TranscriptStore() = default;

    /// Loads a .jsonl file, or every *.jsonl file in a directory (sorted by name).
    static std::shared_ptr<TranscriptStore> load(const std::filesystem::path& path);
    static std::shared_ptr<TranscriptStore> open_for_append(const std::filesystem::path& file);

    /// First record matching the request, or nullptr.
    const TranscriptRecord* find(const std::string& hash, int vote_index) const;

    void append(const TranscriptRecord& record);

    std::vector<TranscriptRecord> records() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptRecord> records_;
    std::map<std::pair<std::string, int>, size_t> lookup_;
    std::filesystem::path sink_;
};

struct BackendReply {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

/// Something that answers a chat request: a provider endpoint or a script.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Throws TransportError for retryable failures.
    virtual BackendReply send(const std::vector<ChatMessage>& messages, const ModelConfig& config,
                              const RequestTag& tag) = 0;
};

/// Deterministic backend that plays canned responses.
///
/// Script JSON: {case_id: {stage: responses}} where `responses` is either an
/// array used for every vote, {"votes": [[...], ...]} with one array per vote
/// index, or {"repeat": "text"} for an endless supply. Case "*" is the
/// fallback. Responses for one (case, stage, vote) are consumed in order.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(nlohmann::json script);
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    BackendReply send(const std::vector<ChatMessage>& messages, const ModelConfig& config,
                      const RequestTag& tag) override;

private:
    nlohmann::json script_;
    std::mutex mutex_;
    std::map<std::tuple<std::string, std::string, int>, size_t> cursor_;
};

/// Spaces requests so no more than `per_second` start each second (0 = unlimited).
class RateLimiter {
public:
    explicit RateLimiter(double per_second = 0.0) : per_second_(per_second) {}
    void acquire();

private:
    double per_second_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_{};
};

enum class GatewayMode { Live, Record, Replay };

std::string_view to_string(GatewayMode mode);
GatewayMode gateway_mode_from_string(std::string_view text);

struct GatewayOptions {
    GatewayMode mode = GatewayMode::Replay;
    int attempts = 3;
    int backoff_ms = 500;
    double requests_per_second = 0.0;
};

struct Completion {
    ChatMessage message;
    TranscriptRecord record;
};

/// Provider-agnostic chat entry point shared by all case workers.
///
/// Live calls the backend. Record calls the backend and appends one
/// TranscriptRecord per call to the sink. Replay never touches a backend and
/// answers from the loaded transcripts, failing with ReplayMissError.
class LlmGateway {
public:
    LlmGateway(GatewayOptions options, std::shared_ptr<ChatBackend> backend,
               std::shared_ptr<TranscriptStore> replay_source, std::shared_ptr<TranscriptStore> sink);

    static LlmGateway replay(std::shared_ptr<TranscriptStore> source);

    /// Does not modify the conversation; the caller appends the reply.
    Completion complete(const Conversation& conversation, const ModelConfig& config, const RequestTag& tag);

    GatewayMode mode() const noexcept { return options_.mode; }

    /// Records (without request messages) of every completed call for a case,
    /// in call order.
    std::vector<TranscriptRecord> calls_for(const std::string& case_id) const;

private:
    struct CallLog {
        std::mutex mutex;
        std::map<std::string, std::vector<TranscriptRecord>> by_case;
    };

    Completion remember(Completion completion, const RequestTag& tag);

    GatewayOptions options_;
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<TranscriptStore> replay_source_;
    std::shared_ptr<TranscriptStore> sink_;
    std::shared_ptr<RateLimiter> limiter_;
    std::shared_ptr<CallLog> log_ = std::make_shared<CallLog>();
};

struct TokenRates {
    double prompt_per_token = 0.0;
    double completion_per_token = 0.0;
};

using RateTable = std::map<std::string, TokenRates>;

/// Sum of token counts times per-token rates. Throws Error naming any model
/// that appears in the transcripts without configured rates.
double estimate_cost(const std::vector<TranscriptRecord>& transcripts, const RateTable& rates);

RateTable rates_from_json(const nlohmann::json& j);

}  // namespace triage
