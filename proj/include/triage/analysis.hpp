#pragma once

#include <memory>
#include <string>

#include "triage/error.hpp"
#include "triage/llm_gateway.hpp"
#include "triage/pka_agent.hpp"
#include "triage/prompt_engine.hpp"

namespace triage {

/// Everything a stage needs besides the case, the index and the gateway.
struct AnalysisSettings {
    std::shared_ptr<const PromptLibrary> prompts;
    ModelConfig model;
    AgentBudget budget;
    RenderOptions render;
    int function_first_part_lines = 60;

    const PromptLibrary& library() const {
        if (!prompts) throw Error("analysis settings carry no prompt library");
        return *prompts;
    }
};

/// Identifies one model exchange for the transcript log.
struct StageCall {
    LlmGateway& gateway;
    const AnalysisSettings& settings;
    std::string case_id;
    int vote_index = 0;

    RequestTag tag(Stage stage) const { return {case_id, std::string(to_string(stage)), vote_index}; }

    /// Sends the conversation, appends the answer and returns it.
    std::string ask(Conversation& conversation, Stage stage) const {
        Completion c = gateway.complete(conversation, settings.model, tag(stage));
        conversation.add_assistant(c.message.content);
        return c.message.content;
    }
};

std::string reformat_request(const std::string& schema, const std::string& problem);

/// Parses `answer`; on ParseError asks once for re-emission in `schema` and
/// parses that. A second failure propagates.
template <class Parse>
auto parse_with_retry(Conversation& conversation, const StageCall& call, Stage stage, const std::string& answer,
                      const std::string& schema, Parse&& parse) -> decltype(parse(answer)) {
    try {
        return parse(answer);
    } catch (const ParseError& e) {
        conversation.add_user(reformat_request(schema, e.what()));
        const std::string again = call.ask(conversation, stage);
        return parse(again);
    }
}

}  // namespace triage
