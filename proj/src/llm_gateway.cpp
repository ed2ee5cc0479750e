#include "triage/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "triage/error.hpp"
#include "triage/hash.hpp"

namespace triage {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(std::string_view text) {
    if (text == "system") return Role::System;
    if (text == "user") return Role::User;
    if (text == "assistant") return Role::Assistant;
    throw ParseError("unknown chat role '" + std::string(text) + "'");
}

Conversation::Conversation(std::string system_prompt) { append(Role::System, std::move(system_prompt)); }

void Conversation::add_user(std::string content) { append(Role::User, std::move(content)); }
void Conversation::add_assistant(std::string content) { append(Role::Assistant, std::move(content)); }

void Conversation::append(Role role, std::string content) {
    if (content.empty()) throw Error("chat message content must be non-empty");
    if (role == Role::System && !messages_.empty()) throw Error("system message must come first");
    if (role != Role::System) {
        const bool after_system = messages_.empty() || messages_.back().role == Role::System;
        const Role expected = after_system ? Role::User
                              : messages_.back().role == Role::User ? Role::Assistant
                                                                    : Role::User;
        if (role != expected) throw Error("conversation roles must alternate user/assistant");
    }
    messages_.push_back({role, std::move(content)});
}

void ModelConfig::validate() const {
    if (model_id.empty()) throw Error("model_id must be set");
    if (!(temperature >= 0.0)) throw Error("temperature must be >= 0");
    if (max_tokens <= 0) throw Error("max_tokens must be positive");
    if (vote_count <= 0 || vote_count % 2 == 0) throw Error("vote_count must be a positive odd integer");
}

json to_json(const TranscriptRecord& r) {
    json msgs = json::array();
    for (const auto& m : r.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return {
        {"case_id", r.case_id},
        {"stage", r.stage},
        {"vote_index", r.vote_index},
        {"model_id", r.model_id},
        {"request_hash", r.request_hash},
        {"messages", msgs},
        {"response", r.response},
        {"prompt_tokens", r.prompt_tokens},
        {"completion_tokens", r.completion_tokens},
        {"wall_time_ms", r.wall_time_ms},
    };
}

TranscriptRecord transcript_from_json(const json& j) {
    TranscriptRecord r;
    try {
        r.case_id = j.at("case_id").get<std::string>();
        r.stage = j.at("stage").get<std::string>();
        r.vote_index = j.at("vote_index").get<int>();
        r.model_id = j.at("model_id").get<std::string>();
        r.request_hash = j.at("request_hash").get<std::string>();
        for (const auto& m : j.at("messages"))
            r.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
        r.response = j.at("response").get<std::string>();
        r.prompt_tokens = j.at("prompt_tokens").get<int>();
        r.completion_tokens = j.at("completion_tokens").get<int>();
        r.wall_time_ms = j.at("wall_time_ms").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("transcript record: ") + e.what());
    }
    return r;
}

std::string request_hash(std::string_view model_id, const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back(json::array({to_string(m.role), m.content}));
    Sha256 h;
    h.update(model_id);
    h.update(std::string_view("\n", 1));
    h.update(msgs.dump());
    return h.hex_digest();
}

std::shared_ptr<TranscriptStore> TranscriptStore::load(const fs::path& path) {
    auto store = std::make_shared<TranscriptStore>();
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else {
        throw Error("transcript path does not exist: " + path.string());
    }
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error("cannot open transcript file " + file.string());
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw ParseError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            TranscriptRecord r = transcript_from_json(j);
            store->lookup_.emplace(std::make_pair(r.request_hash, r.vote_index), store->records_.size());
            store->records_.push_back(std::move(r));
        }
    }
    return store;
}

std::shared_ptr<TranscriptStore> TranscriptStore::open_for_append(const fs::path& file) {
    auto store = std::make_shared<TranscriptStore>();
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream touch(file, std::ios::app);
    if (!touch) throw Error("cannot open transcript file for writing: " + file.string());
    store->sink_ = file;
    return store;
}

const TranscriptRecord* TranscriptStore::find(const std::string& hash, int vote_index) const {
    std::lock_guard lock(mutex_);
    auto it = lookup_.find({hash, vote_index});
    return it == lookup_.end() ? nullptr : &records_[it->second];
}

void TranscriptStore::append(const TranscriptRecord& record) {
    std::lock_guard lock(mutex_);
    if (!sink_.empty()) {
        std::ofstream out(sink_, std::ios::app | std::ios::binary);
        if (!out) throw Error("cannot append to transcript file " + sink_.string());
        out << to_json(record).dump() << '\n';
    }
    lookup_.emplace(std::make_pair(record.request_hash, record.vote_index), records_.size());
    records_.push_back(record);
}

std::vector<TranscriptRecord> TranscriptStore::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

namespace {

int estimate_tokens(size_t chars) { return static_cast<int>((chars + 3) / 4); }

}  // namespace

ScriptedBackend::ScriptedBackend(json script) : script_(std::move(script)) {
    if (!script_.is_object()) throw ParseError("script must be a JSON object");
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open script " + path.string());
    try {
        return std::make_shared<ScriptedBackend>(json::parse(in));
    } catch (const json::exception& e) {
        throw ParseError("script " + path.string() + ": " + e.what());
    }
}

BackendReply ScriptedBackend::send(const std::vector<ChatMessage>& messages, const ModelConfig&, const RequestTag& tag) {
    const json* stages = nullptr;
    if (auto it = script_.find(tag.case_id); it != script_.end() && it->contains(tag.stage)) stages = &*it;
    else if (auto any = script_.find("*"); any != script_.end() && any->contains(tag.stage)) stages = &*any;
    const std::string where = tag.case_id + "/" + tag.stage + "/vote " + std::to_string(tag.vote_index);
    if (stages == nullptr) throw Error("script has no responses for " + where);

    const json& entry = stages->at(tag.stage);
    std::string text;
    {
        std::lock_guard lock(mutex_);
        size_t& cursor = cursor_[{tag.case_id, tag.stage, tag.vote_index}];
        if (entry.is_object() && entry.contains("repeat")) {
            text = entry.at("repeat").get<std::string>();
        } else {
            const json* list = &entry;
            if (entry.is_object() && entry.contains("votes")) {
                const json& votes = entry.at("votes");
                if (votes.empty()) throw Error("script has no votes for " + where);
                list = &votes.at(std::min<size_t>(tag.vote_index, votes.size() - 1));
            }
            if (!list->is_array() || cursor >= list->size()) throw Error("script exhausted for " + where);
            text = list->at(cursor).get<std::string>();
        }
        ++cursor;
    }
    size_t prompt_chars = 0;
    for (const auto& m : messages) prompt_chars += m.content.size();
    return {text, estimate_tokens(prompt_chars), estimate_tokens(text.size())};
}

void RateLimiter::acquire() {
    if (per_second_ <= 0.0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(1.0 / per_second_));
    }
    std::this_thread::sleep_until(slot);
}

std::string_view to_string(GatewayMode mode) {
    switch (mode) {
        case GatewayMode::Live: return "live";
        case GatewayMode::Record: return "record";
        case GatewayMode::Replay: return "replay";
    }
    return "replay";
}

GatewayMode gateway_mode_from_string(std::string_view text) {
    if (text == "live") return GatewayMode::Live;
    if (text == "record") return GatewayMode::Record;
    if (text == "replay") return GatewayMode::Replay;
    throw Error("unknown mode '" + std::string(text) + "' (expected record, replay or live)");
}

LlmGateway::LlmGateway(GatewayOptions options, std::shared_ptr<ChatBackend> backend,
                       std::shared_ptr<TranscriptStore> replay_source, std::shared_ptr<TranscriptStore> sink)
    : options_(options),
      backend_(std::move(backend)),
      replay_source_(std::move(replay_source)),
      sink_(std::move(sink)),
      limiter_(std::make_shared<RateLimiter>(options.requests_per_second)) {
    if (options_.mode == GatewayMode::Replay && !replay_source_) throw Error("replay mode needs recorded transcripts");
    if (options_.mode != GatewayMode::Replay && !backend_) throw Error("live and record modes need a backend");
    if (options_.mode == GatewayMode::Record && !sink_) throw Error("record mode needs a transcript sink");
    if (options_.attempts < 1) throw Error("attempts must be at least 1");
}

LlmGateway LlmGateway::replay(std::shared_ptr<TranscriptStore> source) {
    GatewayOptions options;
    options.mode = GatewayMode::Replay;
    return LlmGateway(options, nullptr, std::move(source), nullptr);
}

Completion LlmGateway::complete(const Conversation& conversation, const ModelConfig& config, const RequestTag& tag) {
    const auto& messages = conversation.messages();
    const std::string hash = request_hash(config.model_id, messages);

    if (options_.mode == GatewayMode::Replay) {
        const TranscriptRecord* hit = replay_source_->find(hash, tag.vote_index);
        if (hit == nullptr) throw ReplayMissError(hash);
        return remember({{Role::Assistant, hit->response}, *hit}, tag);
    }

    BackendReply reply;
    const auto started = std::chrono::steady_clock::now();
    for (int attempt = 1;; ++attempt) {
        limiter_->acquire();
        try {
            reply = backend_->send(messages, config, tag);
            break;
        } catch (const TransportError&) {
            if (attempt >= options_.attempts) throw;
            const auto delay = std::chrono::milliseconds(options_.backoff_ms * (1LL << (attempt - 1)));
            std::this_thread::sleep_for(delay);
        }
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

    TranscriptRecord record{tag.case_id, tag.stage,     tag.vote_index,       config.model_id,
                            hash,        messages,      reply.text,           reply.prompt_tokens,
                            reply.completion_tokens,    std::round(elapsed * 1000.0) / 1000.0};
    if (options_.mode == GatewayMode::Record) sink_->append(record);
    return remember({{Role::Assistant, reply.text}, std::move(record)}, tag);
}

Completion LlmGateway::remember(Completion completion, const RequestTag& tag) {
    TranscriptRecord brief = completion.record;
    brief.messages.clear();
    std::lock_guard lock(log_->mutex);
    log_->by_case[tag.case_id].push_back(std::move(brief));
    return completion;
}

std::vector<TranscriptRecord> LlmGateway::calls_for(const std::string& case_id) const {
    std::lock_guard lock(log_->mutex);
    auto it = log_->by_case.find(case_id);
    return it == log_->by_case.end() ? std::vector<TranscriptRecord>{} : it->second;
}

double estimate_cost(const std::vector<TranscriptRecord>& transcripts, const RateTable& rates) {
    double total = 0.0;
    for (const auto& r : transcripts) {
        auto it = rates.find(r.model_id);
        if (it == rates.end()) throw Error("no token rates configured for model '" + r.model_id + "'");
        total += r.prompt_tokens * it->second.prompt_per_token + r.completion_tokens * it->second.completion_per_token;
    }
    return total;
}

RateTable rates_from_json(const json& j) {
    RateTable rates;
    if (j.is_null()) return rates;
    if (!j.is_object()) throw ParseError("rates must be a JSON object");
    for (const auto& [model, entry] : j.items()) {
        rates[model] = {entry.value("prompt_per_token", 0.0), entry.value("completion_per_token", 0.0)};
    }
    return rates;
}

}  // namespace triage
