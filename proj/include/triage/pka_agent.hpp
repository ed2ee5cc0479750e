#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "triage/llm_gateway.hpp"
#include "triage/prompt_engine.hpp"

namespace triage {

class SymbolIndex;

struct AgentBudget {
    int max_rounds = 8;
    int max_total_snippet_chars = 60000;

    void validate() const;
};

struct AgentOutcome {
    std::string final_response;
    int rounds_used = 0;
    std::vector<ToolRequest> requests_served;
    bool truncated = false;
};

/// State that lives as long as one conversation: which symbols were already
/// sent and how much snippet text has been spent.
struct AgentSession {
    std::set<std::pair<ToolKind, std::string>> served;
    long snippet_chars = 0;
};

inline constexpr std::string_view kRefusalPrefix = "request type not available at this stage: ";
inline constexpr std::string_view kNotFoundPrefix = "not found: ";
inline constexpr std::string_view kPreviouslyProvided = "(previously provided)";
inline constexpr std::string_view kTruncatedMarker = "[truncated]";

/// Drives the tool loop. The conversation must end with the user prompt for
/// the stage; on return it ends with the model's last answer.
///
/// Each round asks the model once. An answer without requests ends the loop.
/// Requests are answered in one user message; kinds outside `callbacks` get
/// a refusal and unknown names a not-found line. When the last allowed round
/// still asks for more, the loop stops with truncated = true.
AgentOutcome run_agent(Conversation& conversation, const std::set<ToolKind>& callbacks, const SymbolIndex& index,
                       const AgentBudget& budget, LlmGateway& gateway, const ModelConfig& model,
                       const RequestTag& tag, AgentSession& session);

/// Text the agent sends back for one request, without budget truncation.
/// One block per argument, each starting "[<kind>] <name>".
std::vector<std::string> lookup_blocks(const ToolRequest& request, const SymbolIndex& index);

}  // namespace triage
