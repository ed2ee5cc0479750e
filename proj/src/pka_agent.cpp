#include "triage/pka_agent.hpp"

#include "triage/code_index.hpp"
#include "triage/error.hpp"

namespace triage {

void AgentBudget::validate() const {
    if (max_rounds < 1) throw Error("max_rounds must be positive");
    if (max_total_snippet_chars < 1) throw Error("max_total_snippet_chars must be positive");
}

std::vector<std::string> lookup_blocks(const ToolRequest& request, const SymbolIndex& index) {
    std::vector<std::string> blocks;
    const std::string kind(to_string(request.kind));
    for (const auto& name : request.args) {
        std::string block = "[" + kind + "] " + name + "\n";
        bool found = false;
        switch (request.kind) {
            case ToolKind::FuncDef:
                for (const auto& d : index.get_func_def(name)) {
                    block += "--- " + d.file + ":" + std::to_string(d.start_line) + "-" + std::to_string(d.end_line) +
                             " ---\n" + d.text + "\n";
                    found = true;
                }
                break;
            case ToolKind::StructDef:
                for (const auto& d : index.get_struct_def(name)) {
                    block += "--- " + d.file + ":" + std::to_string(d.line) + " ---\n" + d.text + "\n";
                    found = true;
                }
                break;
            case ToolKind::GlobalVarDef:
                for (const auto& d : index.get_global_var_def(name)) {
                    block += "--- " + d.file + ":" + std::to_string(d.line) + " ---\n" + d.text + "\n";
                    found = true;
                }
                break;
            case ToolKind::Caller:
                for (const auto& c : index.get_callers(name)) {
                    block += "--- caller " + c.caller_name + " at " + c.file + ":" + std::to_string(c.call_line) +
                             " ---\n" + c.snippet + "\n";
                    found = true;
                }
                break;
        }
        if (!found) block += std::string(kNotFoundPrefix) + name + "\n";
        blocks.push_back(std::move(block));
    }
    return blocks;
}

namespace {

std::string answer_requests(const std::vector<ToolRequest>& requests, const std::set<ToolKind>& callbacks,
                            const SymbolIndex& index, const AgentBudget& budget, AgentSession& session,
                            std::vector<ToolRequest>& served) {
    std::string reply;
    for (const auto& req : requests) {
        const std::string kind(to_string(req.kind));
        if (!callbacks.count(req.kind)) {
            std::string names;
            for (const auto& a : req.args) names += (names.empty() ? "" : ", ") + a;
            reply += "[" + kind + "] " + names + "\n" + std::string(kRefusalPrefix) + kind + "\n\n";
            continue;
        }
        served.push_back(req);
        const auto blocks = lookup_blocks(req, index);
        for (size_t i = 0; i < req.args.size(); ++i) {
            if (!session.served.insert({req.kind, req.args[i]}).second) {
                reply += "[" + kind + "] " + req.args[i] + "\n" + std::string(kPreviouslyProvided) + "\n\n";
                continue;
            }
            const std::string& block = blocks[i];
            const long left = budget.max_total_snippet_chars - session.snippet_chars;
            if (left <= 0) {
                reply += "[" + kind + "] " + req.args[i] + "\n" + std::string(kTruncatedMarker) + "\n\n";
            } else if (static_cast<long>(block.size()) > left) {
                reply += block.substr(0, static_cast<size_t>(left)) + "\n" + std::string(kTruncatedMarker) + "\n\n";
                session.snippet_chars = budget.max_total_snippet_chars;
            } else {
                reply += block + "\n";
                session.snippet_chars += static_cast<long>(block.size());
            }
        }
    }
    while (!reply.empty() && reply.back() == '\n') reply.pop_back();
    return reply;
}

}  // namespace

AgentOutcome run_agent(Conversation& conversation, const std::set<ToolKind>& callbacks, const SymbolIndex& index,
                       const AgentBudget& budget, LlmGateway& gateway, const ModelConfig& model,
                       const RequestTag& tag, AgentSession& session) {
    budget.validate();
    if (conversation.empty() || conversation.back().role != Role::User)
        throw Error("agent needs a conversation ending with a user prompt");
    AgentOutcome out;
    for (int round = 1; round <= budget.max_rounds; ++round) {
        Completion c = gateway.complete(conversation, model, tag);
        conversation.add_assistant(c.message.content);
        out.final_response = c.message.content;
        out.rounds_used = round;

        std::vector<ToolRequest> requests;
        std::string problem;
        try {
            requests = parse_requests(c.message.content);
        } catch (const ParseError& e) {
            problem = e.what();
        }
        if (problem.empty() && requests.empty()) return out;
        if (round == budget.max_rounds) {
            out.truncated = true;
            return out;
        }
        if (!problem.empty()) {
            conversation.add_user("Your request could not be read (" + problem +
                                  "). Please resend it using the <requests> format described above.");
            continue;
        }
        std::string reply = answer_requests(requests, callbacks, index, budget, session, out.requests_served);
        if (reply.empty()) reply = std::string(kNotFoundPrefix) + "(no symbols requested)";
        conversation.add_user(std::move(reply));
    }
    return out;
}

}  // namespace triage
