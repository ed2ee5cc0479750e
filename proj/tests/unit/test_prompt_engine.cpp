#include <doctest.h>

#include <json.hpp>

#include "e2e.hpp"
#include "triage/error.hpp"
#include "triage/prompt_engine.hpp"

using namespace triage;

namespace {

const TaintReport& fixture_case(const std::string& id) {
    static const auto reports = parse_report_file(fixtures::e2e() / "reports.jsonl");
    for (const auto& r : reports)
        if (r.case_id == id) return r;
    throw std::runtime_error("no fixture case " + id);
}

std::string render(Stage stage, const RenderOptions& options, const std::string& id = "fig2-check-x") {
    const CaseContext ctx{&fixture_case(id), "", 60};
    return fixtures::prompts()->render(stage, ctx, fixtures::corpus_index(), options);
}

}  // namespace

TEST_CASE("every stage loads with its argument list and callbacks") {
    const auto& lib = *fixtures::prompts();
    for (Stage s : {Stage::VarInfer, Stage::VarInferSummarize, Stage::SecIA, Stage::SecIASummarize, Stage::ConA1,
                    Stage::ConA2, Stage::ConA3, Stage::ConA4, Stage::ConASummarize, Stage::Simple}) {
        CHECK(stage_from_string(to_string(s)) == s);
        CHECK_FALSE(lib.get(s).body.empty());
    }
    CHECK(lib.get(Stage::ConA2).callbacks ==
          std::set<ToolKind>{ToolKind::FuncDef, ToolKind::Caller, ToolKind::StructDef, ToolKind::GlobalVarDef});
    CHECK(lib.get(Stage::ConA1).callbacks == std::set<ToolKind>{ToolKind::StructDef, ToolKind::GlobalVarDef});
    CHECK(lib.get(Stage::Simple).callbacks.empty());
    CHECK(lib.get(Stage::SecIA).args == std::vector<std::string>{"get_tainted_value", "get_bug_detector", "get_function"});
}

TEST_CASE("rendering substitutes placeholders and the tool protocol") {
    const std::string p = render(Stage::ConA2, {});
    CHECK(p.find("{}") == std::string::npos);
    CHECK(p.find("{AGENT PROMPTS HERE}") == std::string::npos);
    CHECK(p.find("[[") == std::string::npos);
    CHECK(p.find("tainted_variable: req.x\n") != std::string::npos);
    CHECK(p.find("current callchain: demo_ioctl -> demo_handle_req -> op\n") != std::string::npos);
    CHECK(p.find("25: static void op(int x)\n26: {\n27: \tdemo_buf[x] = 1;\n28: }") != std::string::npos);
    CHECK(p.find("<name>need_global_var_def</name>") != std::string::npos);

    // values containing "{}" are not re-expanded
    TaintReport r = fixture_case("fig2-check-x");
    const CaseContext ctx{&r, "a{}b", 60};
    CHECK(fixtures::prompts()->render(Stage::ConA1, ctx, fixtures::corpus_index()).find("a{}b") != std::string::npos);
}

TEST_CASE("providers format their values") {
    const CaseContext ctx{&fixture_case("numid-bypass"), "", 3};
    const auto& index = fixtures::corpus_index();
    CHECK(resolve_provider("get_tainted_value", ctx, index) == "id.index");
    CHECK(resolve_provider("get_source_line_set", ctx, index) == "72, 75, 76, 85, 87");
    CHECK(resolve_provider("get_insts_from_ctx", ctx, index).rfind("line 85: copy_from_user(&id, arg)\n", 0) == 0);
    CHECK(resolve_provider("get_function_first_part", ctx, index) ==
          "66: int snd_ctl_elem_write(struct snd_card *card, struct snd_ctl_elem_id *id,\n67: \t\t       long *value)\n68: {");
    const std::string fn = resolve_provider("get_function", ctx, index);
    CHECK(fn.substr(fn.rfind('\n') + 1) == "\tvalue[index_offset] = kctl->private_value;");
    CHECK(resolve_provider("get_bug_detector", ctx, index) == "Buffer Overflow (out-of-bounds access)");
    CHECK_THROWS_AS(resolve_provider("get_nothing", ctx, index), RenderError);
}

TEST_CASE("an unresolvable sink function names the provider") {
    const CaseContext ctx{&fixture_case("missing-func"), "", 60};
    try {
        fixtures::prompts()->render(Stage::SecIA, ctx, fixtures::corpus_index());
        FAIL("rendered");
    } catch (const RenderError& e) {
        CHECK(std::string(e.what()).rfind("get_function:", 0) == 0);
    }
}

TEST_CASE("ablation switches remove exactly their blocks") {
    const std::string full = render(Stage::ConA2, {});
    const std::string bare = render(Stage::ConA2, {true, false, false});
    CHECK(full.find("Types of constraints to look for:") != std::string::npos);
    CHECK(bare.find("Types of constraints to look for:") == std::string::npos);
    CHECK(bare.find("Help find range constraints") != std::string::npos);
    CHECK(bare.find("<range_constraints>") != std::string::npos);
    CHECK(bare.size() < full.size());

    CHECK(render(Stage::ConA3, {true, false, false}).find("Consider all branches") == std::string::npos);
    CHECK(render(Stage::ConA4, {true, false, false}) == render(Stage::ConA4, {}));

    const std::string hypo = render(Stage::SecIA, {});
    const std::string no_hypo = render(Stage::SecIA, {false, true, false});
    CHECK(hypo.find("All existing checks can be bypassed") != std::string::npos);
    CHECK(no_hypo.find("All existing checks can be bypassed") == std::string::npos);
    CHECK(no_hypo.find("3. Determine if the code represents:") != std::string::npos);
    CHECK(render(Stage::ConA2, {false, true, false}) == full);

    const std::string shots = render(Stage::ConA1, {true, true, true});
    CHECK(shots.find("Worked example:") != std::string::npos);
    CHECK(render(Stage::ConA1, {}).find("Worked example:") == std::string::npos);
    CHECK(render(Stage::ConA1, {true, false, true}).find("Worked example:") == std::string::npos);
}

TEST_CASE("loading rejects a template whose placeholders disagree with its arguments") {
    fixtures::TempDir tmp("prompts");
    std::filesystem::copy(TRIAGE_DEFAULT_PROMPTS_DIR, tmp.path(), std::filesystem::copy_options::recursive);
    CHECK_NOTHROW(PromptLibrary::load(tmp.path()));
    {
        std::ofstream out(tmp.path() / "cona4.txt", std::ios::app);
        out << "extra {}\n";
    }
    CHECK_THROWS_AS(PromptLibrary::load(tmp.path()), Error);
    std::filesystem::remove(tmp.path() / "cona4.txt");
    CHECK_THROWS_AS(PromptLibrary::load(tmp.path()), Error);
}

TEST_CASE("tool requests parse in order and reject malformed blocks") {
    const auto reqs = parse_requests(
        "Let me look.\n<requests><request><name>need_func_def</name><args><arg> a </arg><arg>b</arg></args></request>"
        "<request><name>need_caller</name><args><arg>c</arg></args></request></requests>");
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[0] == ToolRequest{ToolKind::FuncDef, {"a", "b"}});
    CHECK(reqs[1] == ToolRequest{ToolKind::Caller, {"c"}});
    CHECK(parse_requests("no requests here").empty());
    CHECK(parse_requests(to_xml(reqs)) == reqs);
    CHECK_THROWS_AS(parse_requests("<requests></requests>"), ParseError);
    CHECK_THROWS_AS(parse_requests("<requests><request><name>need_magic</name><args><arg>x</arg></args></request></requests>"),
                    ParseError);
    CHECK_THROWS_AS(parse_requests("<requests><request><name>need_caller</name><args><arg>x</arg><arg>y</arg></args>"
                                   "</request></requests>"),
                    ParseError);
}

TEST_CASE("bug_eval answers in long and short form") {
    const SeciaVerdict v = parse_bug_eval(
        "reasoning...\n<bug_eval>\n <tainted_var>x</tainted_var>\n <vulns><vuln><type>out_of_bound_access</type>"
        "<desc>d</desc></vuln></vulns>\n</bug_eval>");
    CHECK(v.label == SeciaLabel::PotentialBug);
    CHECK(v.tainted_var == "x");
    REQUIRE(v.vulns.size() == 1);
    CHECK(v.vulns[0].type == "out_of_bound_access");
    CHECK(parse_bug_eval("<bug_eval>not_a_bug</bug_eval>").label == SeciaLabel::NotABug);
    CHECK(parse_bug_eval("<bug_eval>normal code</bug_eval>").label == SeciaLabel::NotABug);
    CHECK(parse_bug_eval("<bug_eval> Uncertain </bug_eval>").label == SeciaLabel::Uncertain);
    CHECK(parse_bug_eval("<bug_eval>potential_bug</bug_eval>").vulns.size() == 1);
    CHECK(parse_bug_eval("<bug_eval><tainted_var>x</tainted_var><vulns></vulns></bug_eval>").label ==
          SeciaLabel::NotABug);
    // the last element wins when the answer quotes the schema first
    CHECK(parse_bug_eval("<bug_eval>potential_bug</bug_eval> ... <bug_eval>not_a_bug</bug_eval>").label ==
          SeciaLabel::NotABug);
    CHECK_THROWS_AS(parse_bug_eval("it is fine"), ParseError);
    CHECK_THROWS_AS(parse_bug_eval("<bug_eval>maybe</bug_eval>"), ParseError);
    CHECK(parse_bug_eval(to_xml(v)) == v);
}

TEST_CASE("ConA answers parse and serialize back") {
    const auto pre = parse_sink_precondi(
        "<sink_precondi>\n <precondi>\n  <type> dominate_condition </type>\n  <condition> flag </condition>\n"
        "  <dominated_sink> if(flag) sink(tainted_var) </dominated_sink>\n </precondi>\n <precondi>\n"
        "  <type> guard_condition </type>\n  <condition> tainted_var <= 100 </condition>\n"
        "  <guard_bypass> if (tainted_var > 100) return; </guard_bypass>\n </precondi>\n</sink_precondi>");
    REQUIRE(pre.size() == 2);
    CHECK(pre[0].kind == PreconditionKind::DominateCondition);
    CHECK(pre[1].condition == "tainted_var <= 100");
    CHECK(pre[1].context == "if (tainted_var > 100) return;");
    CHECK(parse_sink_precondi(to_xml(pre)) == pre);
    CHECK(parse_sink_precondi("<sink_precondi></sink_precondi>").empty());

    const auto rc = parse_range_constraints(
        "<range_constraints><constraint><type>sanitization</type><handler_func>f</handler_func>"
        "<context>x = min(x, 1)</context></constraint></range_constraints>");
    REQUIRE(rc.size() == 1);
    CHECK(rc[0].kind == ConstraintKind::Sanitization);
    CHECK(parse_range_constraints(to_xml(rc)) == rc);
    CHECK_THROWS_AS(parse_range_constraints("<range_constraints><constraint><type>check</type>"
                                            "<handler_func>f</handler_func></constraint></range_constraints>"),
                    ParseError);

    const std::vector<ConditionPair> pairs{{"a < b", "x in [0, 1]", "ctx"}};
    CHECK(parse_condition_pairs(to_xml("f", ConstraintKind::Validation, pairs)) == pairs);

    for (auto v : {FinalVerdict::StillABug, FinalVerdict::Eliminated, FinalVerdict::LikelySafe,
                   FinalVerdict::LikelyUnsafe, FinalVerdict::NotExploitable, FinalVerdict::Uncertain})
        CHECK(parse_final_res(to_xml(v)) == v);
    CHECK(parse_final_res("<final_res> Still_A_Bug </final_res>") == FinalVerdict::StillABug);
    CHECK_THROWS_AS(parse_final_res("<final_res>fine</final_res>"), ParseError);

    const std::vector<SourceVar> vars{{"req", "demo_req.x", 47}, {"n", "", 3}};
    CHECK(parse_tainted_vars(to_xml(vars)) == vars);
    CHECK_THROWS_AS(parse_tainted_vars("<tainted_vars><var><name>a</name><line>x1</line></var></tainted_vars>"),
                    ParseError);
}

TEST_CASE("schema excerpts come from the rendered prompt") {
    const std::string p = render(Stage::ConA1, {});
    const std::string ex = schema_excerpt(p, "sink_precondi");
    CHECK(ex.rfind("<sink_precondi>", 0) == 0);
    CHECK(ex.size() >= 16);
    CHECK(ex.substr(ex.size() - 16) == "</sink_precondi>");
    CHECK(schema_root(Stage::SecIASummarize) == "bug_eval");
    CHECK(schema_root(Stage::ConA4).empty());
}
