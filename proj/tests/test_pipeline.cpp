#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pmr/error.hpp"
#include "pmr/pipeline.hpp"
#include "scenario.hpp"

using namespace pmr;
using namespace pmrt;

namespace {

SessionTrace run(Mode mode, const SessionScript& s, const QuestionSpec& spec, PipelineConfig config = {}) {
    Bench b(s.turns, s.docs, spec.id);
    b.config = config;
    auto ctx = b.ctx();
    auto t = run_session(mode, ctx, spec);
    EXPECT_EQ(b.backend->remaining(), 0u) << "script not fully consumed";
    return t;
}

std::filesystem::path temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "pmr_pipeline_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Modes, NamesRoundTrip) {
    for (auto m : {Mode::Reasoner, Mode::LlmOnly, Mode::OneShotRag, Mode::SelfReflection})
        EXPECT_EQ(mode_from_string(to_string(m)), m);
    EXPECT_FALSE(mode_from_string("oracle"));
}

TEST(Reasoner, EndToEndGroundedAnswer) {
    auto spec = yes_no_question("q01", "Do leukotriene antagonists help?", "yes");
    auto s = reasoner_session({.id = "q01", .docs = 7, .sufficient_batch = 2});
    auto t = run(Mode::Reasoner, s, spec);
    ASSERT_FALSE(t.failure) << t.failure->message;
    ASSERT_TRUE(t.response);
    EXPECT_EQ(t.response->answer, "yes");
    EXPECT_TRUE(t.response->evidence_grounded);
    EXPECT_TRUE(t.reused_last_search);
    EXPECT_EQ(t.retrieval->batches_processed, 2u);
    EXPECT_EQ(t.retrieval->esd, 7u);
    EXPECT_EQ(t.pool_pmids(), s.pool);
    for (const auto& p : t.response->cited_pmids) EXPECT_TRUE(t.pool_pmids().count(p));
    EXPECT_TRUE(t.ledger.consistent());
    // Search calls: one per refinement iteration plus broadenings; the final search was reused.
    const auto& by = t.ledger.by_stage();
    EXPECT_EQ(by.at(Stage::RefinementSearch).search_calls,
              t.refinement->iterations.size() + t.refinement->broadenings.size());
    EXPECT_EQ(by.count(Stage::RetrievalSearch), 0u);
    EXPECT_EQ(t.ledger.totals().search_calls, 1u);
}

TEST(Reasoner, FreshFinalSearchWhenQueryChanged) {
    auto spec = yes_no_question("q02", "Q?");
    const std::string q0 = "Asthma[mesh]", q1 = "Asthma[mesh] AND children";
    SessionScript s;
    s.docs = ranked_docs(q0, 3, 100);
    auto more = ranked_docs(q1, 2, 200);
    s.docs.insert(s.docs.end(), more.begin(), more.end());
    append(s.turns, plan_turns("q02", {"Asthma"}, q0));
    append(s.turns, iteration_turns("q02", feedback(1, 1, 1), {"Asthma"}, q1));
    s.turns.push_back(filter_turn("q02", {"201", "202"}, {"201"}));
    s.turns.push_back(extract_turn("q02", {"201"}, {"201"}));
    s.turns.push_back(coverage_turn("q02", true));
    s.turns.push_back(summary_turn("q02", "Yes [PMID: 201]."));
    s.turns.push_back(answer_turn("q02", "yes", "See [PMID: 201]."));
    auto t = run(Mode::Reasoner, s, spec);
    ASSERT_FALSE(t.failure);
    EXPECT_FALSE(t.reused_last_search);
    EXPECT_EQ(t.final_query, q1);
    EXPECT_EQ(t.ledger.by_stage().at(Stage::RetrievalSearch).search_calls, 1u);
}

TEST(Reasoner, PlanningFailureRecorded) {
    auto spec = yes_no_question("q03", "Q?");
    SessionScript s;
    s.turns = {turn(schema::kMeshCandidates, {{"terms", term_list({"Asthma"})}}, "q03"),
               turn(schema::kQuery, {{"query", "Asthma[mesh] AND"}}, "q03"),
               turn(schema::kQuery, {{"query", "AND"}}, "q03")};
    auto t = run(Mode::Reasoner, s, spec);
    ASSERT_TRUE(t.failure);
    EXPECT_EQ(t.failure->kind, "planning_failure");
    EXPECT_EQ(t.ledger.totals().llm_calls, 3u);
    EXPECT_TRUE(t.ledger.consistent());
}

TEST(LlmOnly, NoSearch) {
    auto spec = yes_no_question("q04", "Q?");
    SessionScript s;
    s.turns = {answer_turn("q04", "maybe", "Unclear.")};
    auto t = run(Mode::LlmOnly, s, spec);
    EXPECT_EQ(t.ledger.totals().search_calls, 0u);
    EXPECT_EQ(t.ledger.totals().llm_calls, 1u);
    EXPECT_FALSE(t.response->evidence_grounded);
}

TEST(OneShotRag, OneSearchThreeCalls) {
    auto spec = yes_no_question("q05", "Q?");
    auto t = run(Mode::OneShotRag, rag_session("q05", 3, "no", 500), spec);
    ASSERT_FALSE(t.failure);
    EXPECT_EQ(t.ledger.totals().search_calls, 1u);
    EXPECT_EQ(t.ledger.totals().llm_calls, 3u);
    EXPECT_EQ(t.pool.size(), 3u);
    EXPECT_TRUE(t.response->evidence_grounded);
}

TEST(SelfReflection, RevisesOnceThenStopsOnRepeat) {
    auto spec = yes_no_question("q06", "Q?");
    auto s = rag_session("q06", 2, "maybe", 600);
    const std::string q2 = "Asthma[mesh] AND q06 AND children";
    auto extra = ranked_docs(q2, 1, 700);
    s.docs.insert(s.docs.end(), extra.begin(), extra.end());
    s.turns.push_back(turn(schema::kSelfReflection, {{"query", q2}, {"rationale", "narrow"}}, "q06"));
    s.turns.push_back(summary_turn("q06", "Merged [PMID: 601] [PMID: 701]."));
    s.turns.push_back(answer_turn("q06", "yes", "Now clear [PMID: 701]."));
    s.turns.push_back(turn(schema::kSelfReflection, {{"query", q2}}, "q06"));
    auto t = run(Mode::SelfReflection, s, spec);
    ASSERT_FALSE(t.failure);
    EXPECT_EQ(t.reflections.size(), 1u);
    EXPECT_EQ(t.reflection_stop, "repeated_query");
    EXPECT_EQ(t.pool.size(), 3u);
    EXPECT_EQ(t.response->answer, "yes");
    EXPECT_EQ(t.ledger.totals().search_calls, 2u);
}

TEST(SelfReflection, BudgetBoundsRounds) {
    auto spec = yes_no_question("q07", "Q?");
    auto s = rag_session("q07", 1, "maybe", 800);
    PipelineConfig cfg;
    cfg.self_reflection_rounds = 2;
    for (int r = 1; r <= 2; ++r) {
        auto q = "Asthma[mesh] AND q07 AND round" + std::to_string(r);
        s.turns.push_back(turn(schema::kSelfReflection, {{"query", q}}, "q07"));
        s.turns.push_back(summary_turn("q07", "Same [PMID: 801]."));
        s.turns.push_back(answer_turn("q07", "maybe", "Same [PMID: 801]."));
    }
    auto t = run(Mode::SelfReflection, s, spec, cfg);
    EXPECT_EQ(t.reflections.size(), 2u);
    EXPECT_EQ(t.reflection_stop, "budget");
    EXPECT_EQ(t.ledger.totals().search_calls, 3u);
}

TEST(Trace, SerializedKeysAndReplayIsDeterministic) {
    auto spec = yes_no_question("q08", "Q?", "yes");
    auto t = run(Mode::Reasoner, reasoner_session({.id = "q08"}), spec);
    auto j = to_json(t);
    for (const char* k : {"mode", "model", "question", "config", "plan", "refinement", "final_search", "retrieval",
                          "pool", "summary", "response", "stop_reasons", "ledger"})
        EXPECT_TRUE(j.contains(k)) << k;
    auto path = temp_file("q08.trace.json");
    std::ofstream(path) << j.dump(2);
    auto a = render_report(load_trace(path));
    auto b = render_report(load_trace(path));
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("Asthma[mesh] AND q08"), std::string::npos);
}

TEST(Trace, TruncatedFileRejected) {
    auto spec = yes_no_question("q09", "Q?");
    auto t = run(Mode::Reasoner, reasoner_session({.id = "q09"}), spec);
    auto text = to_json(t).dump(2);
    auto path = temp_file("q09.trace.json");
    std::ofstream(path) << text.substr(0, text.size() / 2);
    EXPECT_THROW(load_trace(path), TraceFormatError);
    EXPECT_THROW(load_trace(temp_file("does-not-exist.json")), TraceFormatError);
}

TEST(Trace, TamperedTotalsRejected) {
    auto spec = yes_no_question("q10", "Q?");
    auto j = to_json(run(Mode::Reasoner, reasoner_session({.id = "q10"}), spec));
    j["ledger"]["totals"]["input_tokens"] = 1;
    EXPECT_THROW(render_report(j), TraceFormatError);
    j.erase("ledger");
    EXPECT_THROW(render_report(j), TraceFormatError);
}

TEST(Trace, ReplayedLedgerMatchesStoredTotals) {
    auto spec = yes_no_question("q11", "Q?");
    auto t = run(Mode::Reasoner, reasoner_session({.id = "q11", .docs = 12, .sufficient_batch = 0}), spec);
    auto back = CostLedger::from_json(to_json(t)["ledger"]);
    EXPECT_EQ(back.totals(), t.ledger.totals());
    EXPECT_EQ(CostLedger::totals_from_calls(back.calls()), t.ledger.totals());
}
