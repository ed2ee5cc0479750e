#include <doctest.h>

#include <json.hpp>

#include "e2e.hpp"
#include "triage/error.hpp"
#include "triage/pka_agent.hpp"

using namespace triage;
using nlohmann::json;

namespace {

std::string request(const std::string& kind, std::vector<std::string> args) {
    return to_xml(std::vector<ToolRequest>{{tool_kind_from_string(kind), std::move(args)}});
}

struct Harness {
    std::shared_ptr<ScriptedBackend> backend;
    LlmGateway gateway;
    Conversation conv;
    AgentSession session;

    explicit Harness(json responses)
        : backend(std::make_shared<ScriptedBackend>(json{{"c", {{"cona2", std::move(responses)}}}})),
          gateway({GatewayMode::Live}, backend, nullptr, nullptr) {
        conv.add_user("stage prompt");
    }

    AgentOutcome run(std::set<ToolKind> callbacks, AgentBudget budget = {}) {
        return run_agent(conv, callbacks, fixtures::corpus_index(), budget, gateway, {}, {"c", "cona2", 0}, session);
    }

    const std::string& reply(size_t round) const { return conv.messages().at(2 * round).content; }
};

const std::set<ToolKind> kAll{ToolKind::FuncDef, ToolKind::StructDef, ToolKind::Caller, ToolKind::GlobalVarDef};

}  // namespace

TEST_CASE("an answer without requests ends the loop at once") {
    Harness h(json::array({"final answer"}));
    const AgentOutcome out = h.run(kAll);
    CHECK(out.rounds_used == 1);
    CHECK_FALSE(out.truncated);
    CHECK(out.final_response == "final answer");
    CHECK(h.conv.size() == 2);
}

TEST_CASE("requests are answered from the index with provenance") {
    Harness h(json::array({request("need_func_def", {"op", "nope"}), request("need_caller", {"check_x"}),
                           request("need_struct_def", {"demo_req"}), "done"}));
    const AgentOutcome out = h.run(kAll);
    CHECK(out.rounds_used == 4);
    CHECK(out.requests_served.size() == 3);
    const std::string& first = h.reply(1);
    CHECK(first.find("[need_func_def] op\n--- drivers/demo/config_check.c:25-28 ---\nstatic void op(int x)") == 0);
    CHECK(first.find("[need_func_def] nope\nnot found: nope") != std::string::npos);
    CHECK(h.reply(2).find("--- caller demo_handle_req at drivers/demo/config_check.c:34 ---") != std::string::npos);
    CHECK(h.reply(3).find("--- drivers/demo/config_check.c:7 ---\nstruct demo_req {") != std::string::npos);
}

TEST_CASE("kinds outside the stage's callbacks are refused") {
    Harness h(json::array({request("need_caller", {"op"}), "done"}));
    const AgentOutcome out = h.run({ToolKind::StructDef});
    CHECK(out.requests_served.empty());
    CHECK(h.reply(1) == "[need_caller] op\n" + std::string(kRefusalPrefix) + "need_caller");
}

TEST_CASE("symbols already sent in the conversation are not resent") {
    Harness h(json::array({request("need_func_def", {"op"}), request("need_func_def", {"op"}), "done"}));
    h.run(kAll);
    CHECK(h.reply(2) == "[need_func_def] op\n" + std::string(kPreviouslyProvided));
}

TEST_CASE("snippet budget truncates replies") {
    Harness h(json::array({request("need_func_def", {"snd_ctl_find_id"}), request("need_func_def", {"op"}), "done"}));
    AgentBudget budget;
    budget.max_total_snippet_chars = 100;
    h.run(kAll, budget);
    CHECK(h.reply(1).size() == 100 + 1 + kTruncatedMarker.size());
    CHECK(h.reply(1).substr(101) == kTruncatedMarker);
    CHECK(h.reply(2) == "[need_func_def] op\n" + std::string(kTruncatedMarker));
}

TEST_CASE("malformed requests get one reformat prompt per round") {
    Harness h(json::array({"<requests></requests>", "done"}));
    const AgentOutcome out = h.run(kAll);
    CHECK(out.rounds_used == 2);
    CHECK(h.reply(1).find("could not be read") != std::string::npos);
}

TEST_CASE("endless requests stop at exactly max_rounds") {
    for (int rounds : {1, 2, 3, 5, 8}) {
        Harness h(json{{"repeat", request("need_struct_def", {"demo_req"})}});
        AgentBudget budget;
        budget.max_rounds = rounds;
        const AgentOutcome out = h.run(kAll, budget);
        CHECK(out.rounds_used == rounds);
        CHECK(out.truncated);
        CHECK(static_cast<int>(h.gateway.calls_for("c").size()) == rounds);
        CHECK(h.conv.back().role == Role::Assistant);
    }
}

TEST_CASE("the loop needs a pending user prompt and a sane budget") {
    Harness h(json::array({"x"}));
    AgentBudget bad;
    bad.max_rounds = 0;
    CHECK_THROWS_AS(h.run(kAll, bad), Error);
    Conversation empty;
    AgentSession s;
    CHECK_THROWS_AS(run_agent(empty, kAll, fixtures::corpus_index(), {}, h.gateway, {}, {"c", "cona2", 0}, s), Error);
}
