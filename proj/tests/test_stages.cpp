#include <gtest/gtest.h>

#include "pmr/error.hpp"
#include "pmr/planner.hpp"
#include "pmr/retriever.hpp"
#include "pmr/self_critic.hpp"
#include "pmr/synthesizer.hpp"
#include "scenario.hpp"

using namespace pmr;
using namespace pmrt;

namespace {

QuestionSpec leukotriene_question() {
    auto q = yes_no_question("q1", "Do leukotriene antagonists reduce asthma exacerbations in children?");
    return q;
}

std::vector<MeshCandidate> pool_of(const std::vector<std::string>& terms) {
    std::vector<MeshCandidate> out;
    for (const auto& t : terms) out.push_back({t, "relevant to " + t, true});
    return out;
}

std::vector<std::string> pmids(std::size_t n, int base = 1000) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n; ++i) out.push_back(std::to_string(base + static_cast<int>(i)));
    return out;
}

}  // namespace

// Planner

TEST(Planner, CandidatesDeduplicatedWithRationales) {
    json terms = json::array({{{"term", "Asthma"}, {"rationale", "disease"}},
                              {{"term", "asthma"}, {"rationale", "duplicate"}},
                              {{"term", "Leukotriene Antagonists"}, {"rationale", "mediator"}}});
    Bench b({turn(schema::kMeshCandidates, {{"terms", terms}})});
    auto ctx = b.ctx();
    auto c = planner::generate_candidates(ctx, leukotriene_question());
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].term, "Asthma");
    for (const auto& m : c) {
        EXPECT_FALSE(m.rationale.empty());
        EXPECT_FALSE(m.selected);
    }
}

TEST(Planner, EmptyCandidatesTwiceIsEmptyPlan) {
    Bench b({turn(schema::kMeshCandidates, {{"terms", json::array()}}),
             turn(schema::kMeshCandidates, {{"terms", json::array()}})});
    auto ctx = b.ctx();
    EXPECT_THROW(planner::generate_candidates(ctx, leukotriene_question()), EmptyPlan);
    EXPECT_EQ(b.ledger.totals().llm_calls, 2u);
}

TEST(Planner, SelectsExactlyTheChosenSubset) {
    auto pool = pool_of({"A", "B", "C", "D", "E"});
    for (auto& p : pool) p.selected = false;
    Bench b({turn(schema::kMeshSelection, {{"selected", {"B", "d", "E"}}})});
    auto ctx = b.ctx();
    auto sel = planner::select_candidates(ctx, pool, leukotriene_question());
    std::vector<std::string> names;
    for (const auto& s : sel) {
        names.push_back(s.term);
        EXPECT_TRUE(s.selected);
    }
    EXPECT_EQ(names, (std::vector<std::string>{"B", "D", "E"}));
}

TEST(Planner, SelectionOutsidePoolIsBadEnum) {
    Bench b({turn(schema::kMeshSelection, {{"selected", {"Zebra"}}})});
    auto ctx = b.ctx();
    try {
        planner::select_candidates(ctx, pool_of({"A", "B"}), leukotriene_question());
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_EQ(e.kind(), SchemaError::Kind::BadEnum);
    }
}

TEST(Planner, SingletonPoolSelectedWithoutACall) {
    Bench b({});
    auto ctx = b.ctx();
    auto sel = planner::select_candidates(ctx, pool_of({"Asthma"}), leukotriene_question());
    ASSERT_EQ(sel.size(), 1u);
    EXPECT_TRUE(sel[0].selected);
    EXPECT_EQ(b.ledger.totals().llm_calls, 0u);
}

TEST(Planner, DraftNormalizedWithWindow) {
    auto spec = leukotriene_question();
    spec.date_window = query::DateRange::years(1990, 2000);
    Bench b({turn(schema::kQuery, {{"query", "1990:2000[pdat] AND Leukotrienes[mesh] AND Asthma[mesh]"}})});
    auto ctx = b.ctx();
    auto q = planner::draft_initial_query(ctx, pool_of({"Asthma", "Leukotrienes"}), spec);
    // Stable class ordering keeps the drafted MeSH order; the date follows them.
    EXPECT_EQ(query::render_query(q), "Leukotrienes[mesh] AND Asthma[mesh] AND 1990:2000[pdat]");
}

TEST(Planner, DraftMissingWindowGetsItInjected) {
    auto spec = leukotriene_question();
    spec.date_window = query::DateRange::years(1990, 2000);
    Bench b({turn(schema::kQuery, {{"query", "Asthma[mesh] AND Leukotrienes[mesh]"}})});
    auto ctx = b.ctx();
    auto q = planner::draft_initial_query(ctx, pool_of({"Asthma", "Leukotrienes"}), spec);
    EXPECT_EQ(query::render_query(q), "Asthma[mesh] AND Leukotrienes[mesh] AND 1990:2000[pdat]");
}

TEST(Planner, UnparseableDraftTwiceIsPlanningFailure) {
    Bench b({turn(schema::kQuery, {{"query", "Asthma[mesh] AND"}}), turn(schema::kQuery, {{"query", "(Asthma"}})});
    auto ctx = b.ctx();
    EXPECT_THROW(planner::draft_initial_query(ctx, pool_of({"Asthma"}), leukotriene_question()), PlanningFailure);
}

TEST(Planner, DroppedTermsRecorded) {
    Bench b({turn(schema::kQuery, {{"query", "Asthma[mesh]"}})});
    auto ctx = b.ctx();
    std::vector<std::string> dropped;
    planner::draft_initial_query(ctx, pool_of({"Asthma", "Child"}), leukotriene_question(), nullptr, &dropped);
    EXPECT_EQ(dropped, (std::vector<std::string>{"Child"}));
}

// Self-critic

namespace {
critic::RefinementState state_with(const std::vector<std::string>& terms, const std::string& q) {
    critic::RefinementState s;
    s.mesh_pool = pool_of(terms);
    s.query = query::parse_query(q);
    s.history = {s.query};
    return s;
}

json per_term(const std::string& term, bool cov, bool align, bool redundant) {
    auto yn = [](bool b) { return b ? "Yes" : "No"; };
    json red = {{"verdict", yn(redundant)}, {"rationale", "."}};
    if (redundant) red["boolean_hint"] = "OR";
    return {{"term", term},
            {"coverage", {{"verdict", yn(cov)}, {"rationale", "."}}},
            {"alignment", {{"verdict", yn(align)}, {"rationale", "."}}},
            {"redundancy", red}};
}
}  // namespace

TEST(Critic, PerTermFormHasThreeEntriesPerTerm) {
    Bench b({turn(schema::kCritique, {{"terms", {per_term("Asthma", true, true, false), per_term("Child", true, false, true)}}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma", "Child"}, "Asthma[mesh] AND Child[mesh]");
    auto c = critic::critique(ctx, s, {record("1", 1)}, leukotriene_question());
    EXPECT_EQ(c.entries.size(), 6u);
    EXPECT_EQ(c.form, "per_term");
    for (const auto& e : c.entries)
        if (e.dimension == critic::Dimension::Redundancy && e.verdict) EXPECT_TRUE(e.boolean_hint.has_value());
}

TEST(Critic, EmptyMetadataForcesMinusOne) {
    Bench b({turn(schema::kCritique, {{"feedback", feedback(1, 1, 1)}})});
    auto ctx = b.ctx();
    auto c = critic::critique(ctx, state_with({"Asthma"}, "Asthma[mesh]"), {}, leukotriene_question());
    EXPECT_EQ(c.aggregate, (critic::AggregateFeedback{-1, -1, -1, "", "", ""}));
    EXPECT_TRUE(c.forced_no_context);
}

TEST(Critic, RedundantMisalignedTermRemovedByModel) {
    Bench b({turn(schema::kCritique, {{"terms", {per_term("Asthma", true, true, false), per_term("Child", true, false, true)}}}),
             turn(schema::kMeshUpdate, {{"terms", term_list({"Asthma"})}, {"changes", {{{"term", "Child"}, {"action", "removed"}}}}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma", "Child"}, "Asthma[mesh] AND Child[mesh]");
    auto c = critic::critique(ctx, s, {record("1", 1)}, leukotriene_question());
    auto u = critic::update_pool(ctx, s, c, {record("1", 1)}, leukotriene_question());
    ASSERT_EQ(u.pool.size(), 1u);
    EXPECT_EQ(u.pool[0].term, "Asthma");
    ASSERT_EQ(u.changes.size(), 1u);
    EXPECT_EQ(u.changes[0].action, "removed");
}

TEST(Critic, RedundantMisalignedTermEnforcedWhenKept) {
    Bench b({turn(schema::kCritique, {{"terms", {per_term("Asthma", true, true, false), per_term("Child", true, false, true)}}}),
             turn(schema::kMeshUpdate, {{"terms", term_list({"Asthma", "Child"})}, {"changes", json::array()}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma", "Child"}, "Asthma[mesh] AND Child[mesh]");
    auto c = critic::critique(ctx, s, {record("1", 1)}, leukotriene_question());
    auto u = critic::update_pool(ctx, s, c, {record("1", 1)}, leukotriene_question());
    ASSERT_EQ(u.pool.size(), 1u);
    EXPECT_EQ(u.changes[0].action, "removed (enforced)");
}

TEST(Critic, FavourableVerdictsKeepPool) {
    Bench b({turn(schema::kMeshUpdate, {{"terms", term_list({"Asthma", "Child"})}, {"changes", json::array()}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma", "Child"}, "Asthma[mesh] AND Child[mesh]");
    critic::Critique c;
    c.aggregate = {1, 1, 1, "", "", ""};
    auto u = critic::update_pool(ctx, s, c, {record("1", 1)}, leukotriene_question());
    ASSERT_EQ(u.pool.size(), 2u);
    EXPECT_EQ(u.pool[0].term, s.mesh_pool[0].term);
    EXPECT_EQ(u.pool[1].term, s.mesh_pool[1].term);
    EXPECT_TRUE(u.changes.empty());
    EXPECT_FALSE(u.fell_back);
}

TEST(Critic, EmptiedPoolTwiceFallsBack) {
    Bench b({turn(schema::kMeshUpdate, {{"terms", json::array()}}), turn(schema::kMeshUpdate, {{"terms", json::array()}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma"}, "Asthma[mesh]");
    auto u = critic::update_pool(ctx, s, critic::Critique{}, {}, leukotriene_question());
    EXPECT_TRUE(u.fell_back);
    ASSERT_EQ(u.pool.size(), 1u);
    EXPECT_FALSE(u.flags.empty());
}

TEST(Critic, OrGroupRefinementNormalized) {
    Bench b({turn(schema::kRefinedQuery, {{"query", "children AND (Leukotrienes[mesh] OR Montelukast[mesh]) AND Asthma[mesh]"}})});
    auto ctx = b.ctx();
    auto s = state_with({"Asthma"}, "Asthma[mesh]");
    critic::IterationRecord rec;
    auto q = critic::refine_query(ctx, s, critic::Critique{}, {}, leukotriene_question(), rec);
    ASSERT_TRUE(q);
    EXPECT_EQ(query::render_query(*q), "(Leukotrienes[mesh] OR Montelukast[mesh]) AND Asthma[mesh] AND children");
}

TEST(Critic, MalformedRefinementTwiceReturnsNothing) {
    Bench b({turn(schema::kRefinedQuery, {{"query", "AND"}}), turn(schema::kRefinedQuery, {{"query", "("}})});
    auto ctx = b.ctx();
    critic::IterationRecord rec;
    EXPECT_FALSE(critic::refine_query(ctx, state_with({"A"}, "A[mesh]"), critic::Critique{}, {}, leukotriene_question(), rec));
}

TEST(Refinement, BudgetThreeConvergesAtTwo) {
    const std::string q0 = "Asthma[mesh]", q1 = "Asthma[mesh] AND children", q2 = "Asthma[mesh] AND Child[mesh]";
    std::vector<ScriptedTurn> t;
    append(t, iteration_turns("", feedback(0, 1, 1), {"Asthma"}, q1));
    append(t, iteration_turns("", feedback(1, 1, 1), {"Asthma", "Child"}, q2));
    auto docs = ranked_docs(q0, 4, 100);
    auto more = ranked_docs(q1, 4, 200);
    docs.insert(docs.end(), more.begin(), more.end());
    Bench b(t, docs);
    auto ctx = b.ctx();
    auto s = critic::run_refinement(ctx, leukotriene_question(), query::parse_query(q0), pool_of({"Asthma"}), 3);
    EXPECT_EQ(s.history.size(), 3u);
    EXPECT_EQ(s.stop, critic::StopReason::Converged);
    EXPECT_EQ(query::render_query(s.q_star()), q2);
}

TEST(Refinement, BudgetOneRunsOneCritique) {
    std::vector<ScriptedTurn> t = iteration_turns("", feedback(0, 0, 0), {"Asthma"}, "Asthma[mesh] AND children");
    Bench b(t, ranked_docs("Asthma[mesh]", 3));
    auto ctx = b.ctx();
    auto s = critic::run_refinement(ctx, leukotriene_question(), query::parse_query("Asthma[mesh]"), pool_of({"Asthma"}), 1);
    EXPECT_EQ(s.iterations.size(), 1u);
    EXPECT_EQ(s.stop, critic::StopReason::BudgetExhausted);
    EXPECT_EQ(b.ledger.by_stage().at(Stage::Critique).llm_calls, 1u);
}

TEST(Refinement, HistoryDuplicateConverges) {
    std::vector<ScriptedTurn> t = iteration_turns("", feedback(0, 1, 1), {"Asthma"}, "Asthma[mesh]");
    Bench b(t, ranked_docs("Asthma[mesh]", 3));
    auto ctx = b.ctx();
    auto s = critic::run_refinement(ctx, leukotriene_question(), query::parse_query("Asthma[mesh]"), pool_of({"Asthma"}), 3);
    EXPECT_EQ(s.stop, critic::StopReason::Converged);
    EXPECT_NE(s.stop_detail.find("repeats"), std::string::npos);
}

TEST(Refinement, EmptyResultBroadenedOnce) {
    const std::string q0 = "Asthma[mesh] AND Leukotrienes[mesh] AND zafirlukast";
    const std::string q0b = "Asthma[mesh] AND Leukotrienes[mesh]";
    std::vector<ScriptedTurn> t = iteration_turns("", feedback(1, 1, 1), {"Asthma", "Leukotrienes"}, q0b);
    Bench b(t, ranked_docs(q0b, 5));
    auto ctx = b.ctx();
    auto s = critic::run_refinement(ctx, leukotriene_question(), query::parse_query(q0),
                                    pool_of({"Asthma", "Leukotrienes"}), 3);
    ASSERT_EQ(s.broadenings.size(), 1u);
    EXPECT_EQ(s.broadenings[0].to, q0b);
    EXPECT_EQ(s.broadenings[0].total_hits, 5u);
    EXPECT_NE(s.stop_detail.find("1 broadening"), std::string::npos);
    EXPECT_EQ(b.ledger.totals().search_calls, 2u);
}

// Reflective retrieval

TEST(Retrieval, FilterScreensTopTwenty) {
    auto ids = pmids(20);
    Bench b({filter_turn("", ids, {ids.begin(), ids.end()})});
    auto ctx = b.ctx();
    auto v = retrieval::coarse_filter(ctx, result_of(30).records, leukotriene_question(), 20, nullptr);
    EXPECT_EQ(v.size(), 20u);
}

TEST(Retrieval, KeptOrderFollowsRank) {
    auto ids = pmids(5);
    Bench b({filter_turn("", ids, {ids[0], ids[2], ids[3]}), extract_turn("", {ids[0], ids[2], ids[3]}, {}),
             coverage_turn("", false)});
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(5), leukotriene_question());
    ASSERT_EQ(out.kept.size(), 3u);
    EXPECT_EQ(out.kept[0].rank, 1u);
    EXPECT_EQ(out.kept[1].rank, 3u);
    EXPECT_EQ(out.kept[2].rank, 4u);
}

TEST(Retrieval, NoRecordsIsExhaustedWithEmptyPool) {
    Bench b({});
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(0), leukotriene_question());
    EXPECT_TRUE(out.verdicts.empty());
    EXPECT_TRUE(out.pool.empty());
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Exhausted);
    EXPECT_EQ(b.ledger.totals().llm_calls, 0u);
}

TEST(Retrieval, BatchAlignsTwo) {
    auto ids = pmids(5);
    Bench b({extract_turn("", ids, {ids[1], ids[4]})});
    auto ctx = b.ctx();
    auto items = retrieval::extract_batch(ctx, result_of(5).records, leukotriene_question(), 1, nullptr);
    EXPECT_EQ(std::count_if(items.begin(), items.end(), [](const auto& e) { return e.aligned; }), 2);
}

TEST(Retrieval, AlignedWithoutPassageCoerced) {
    json items = json::array({{{"pmid", "1001"}, {"passage", ""}, {"aligned", "Yes"}}});
    Bench b({turn(schema::kExtract, {{"items", items}})});
    auto ctx = b.ctx();
    std::vector<std::string> flags;
    auto out = retrieval::extract_batch(ctx, result_of(1).records, leukotriene_question(), 1, &flags);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_FALSE(out[0].aligned);
    EXPECT_FALSE(flags.empty());
}

TEST(Retrieval, SufficientAfterFirstBatch) {
    auto ids = pmids(8);
    std::vector<std::string> first(ids.begin(), ids.begin() + 5);
    Bench b({filter_turn("", ids, {ids.begin(), ids.end()}), extract_turn("", first, {ids[0]}), coverage_turn("", true)});
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(8), leukotriene_question());
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Sufficient);
    EXPECT_EQ(out.esd, 5u);
    EXPECT_EQ(out.batches_processed, 1u);
}

TEST(Retrieval, TwelveKeptPartitionFiveFiveTwo) {
    auto ids = pmids(12);
    std::vector<ScriptedTurn> t{filter_turn("", ids, {ids.begin(), ids.end()})};
    for (std::size_t s = 0; s < 12; s += 5) {
        std::vector<std::string> batch(ids.begin() + s, ids.begin() + std::min<std::size_t>(12, s + 5));
        t.push_back(extract_turn("", batch, {batch[0]}));
        t.push_back(coverage_turn("", false));
    }
    Bench b(t);
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(12), leukotriene_question());
    ASSERT_EQ(out.batches.size(), 3u);
    EXPECT_EQ(out.batches[0].pmids.size(), 5u);
    EXPECT_EQ(out.batches[1].pmids.size(), 5u);
    EXPECT_EQ(out.batches[2].pmids.size(), 2u);
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Exhausted);
    EXPECT_EQ(out.esd, 12u);
    EXPECT_FALSE(out.diminishing);
}

TEST(Retrieval, EmptyPoolAfterFinalBatch) {
    auto ids = pmids(3);
    Bench b({filter_turn("", ids, {ids.begin(), ids.end()}), extract_turn("", ids, {}), coverage_turn("", false)});
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(3), leukotriene_question());
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Exhausted);
    EXPECT_TRUE(out.pool.empty());
}

TEST(Retrieval, TwoZeroYieldBatchesStopEarly) {
    auto ids = pmids(15);
    std::vector<ScriptedTurn> t{filter_turn("", ids, {ids.begin(), ids.end()})};
    for (int k = 0; k < 2; ++k) {
        std::vector<std::string> batch(ids.begin() + 5 * k, ids.begin() + 5 * k + 5);
        t.push_back(extract_turn("", batch, {}));
        t.push_back(coverage_turn("", false));
    }
    Bench b(t);
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(15), leukotriene_question());
    EXPECT_EQ(out.batches_processed, 2u);
    EXPECT_TRUE(out.diminishing);
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Exhausted);
}

TEST(Retrieval, UnlimitedBudgetNeverStopsOnTokens) {
    auto ids = pmids(10);
    std::vector<ScriptedTurn> t{filter_turn("", ids, {ids.begin(), ids.end()}, 1000000, 1000000)};
    for (int k = 0; k < 2; ++k) {
        std::vector<std::string> batch(ids.begin() + 5 * k, ids.begin() + 5 * k + 5);
        t.push_back(extract_turn("", batch, {batch[0]}, 1000000, 1000000));
        t.push_back(coverage_turn("", false));
    }
    Bench b(t);
    auto ctx = b.ctx();
    auto out = retrieval::run_retrieval(ctx, result_of(10), leukotriene_question());
    EXPECT_EQ(out.stop_reason, retrieval::StopReason::Exhausted);
    EXPECT_EQ(out.batches_processed, 2u);
}

// Synthesis

namespace {
std::vector<retrieval::EvidenceItem> evidence(std::initializer_list<std::pair<const char*, const char*>> items) {
    std::vector<retrieval::EvidenceItem> out;
    for (auto [pmid, passage] : items) out.push_back({pmid, passage, true, "", 1});
    return out;
}
}  // namespace

TEST(Citations, ParseAndRestrict) {
    EXPECT_EQ(synth::parse_citations("x [PMID: 1] y [pmid:2, PMID: 3] z [PMID 4]"),
              (std::vector<std::string>{"1", "2", "3"}));
    std::vector<std::string> stripped;
    auto out = synth::restrict_citations("A [PMID: 1, PMID: 999]. B [PMID: 999].", {"1"}, &stripped);
    EXPECT_EQ(out, "A [PMID: 1]. B.");
    EXPECT_EQ(stripped, (std::vector<std::string>{"999", "999"}));
}

TEST(Synthesis, RawSourcesGroupedPerArticle) {
    auto pool = evidence({{"1", "a"}, {"2", "b"}, {"1", "c"}});
    auto raw = synth::raw_sources(pool);
    std::set<std::string> ids;
    for (auto& id : synth::parse_citations(raw)) ids.insert(id);
    EXPECT_EQ(ids, (std::set<std::string>{"1", "2"}));
}

TEST(Synthesis, SummaryCitesTwoArticles) {
    Bench b({summary_turn("", "Passages a and c [PMID: 1]. Passage b [PMID: 2].")});
    auto ctx = b.ctx();
    auto soe = synth::summarize(ctx, evidence({{"1", "a"}, {"2", "b"}, {"1", "c"}}), leukotriene_question());
    EXPECT_EQ(soe.cited_pmids, (std::set<std::string>{"1", "2"}));
}

TEST(Synthesis, InventedPmidStrippedAndFlagged) {
    Bench b({summary_turn("", "Claim [PMID: 999]. Real [PMID: 1]."), summary_turn("", "Claim [PMID: 999]. Real [PMID: 1].")});
    auto ctx = b.ctx();
    auto soe = synth::summarize(ctx, evidence({{"1", "a"}}), leukotriene_question());
    EXPECT_EQ(soe.cited_pmids, (std::set<std::string>{"1"}));
    EXPECT_EQ(soe.stripped, (std::vector<std::string>{"999"}));
    EXPECT_EQ(soe.text.find("999"), std::string::npos);
    EXPECT_FALSE(soe.flags.empty());
}

TEST(Synthesis, EmptyPoolFlagged) {
    Bench b({});
    auto ctx = b.ctx();
    auto soe = synth::summarize(ctx, {}, leukotriene_question());
    EXPECT_TRUE(soe.empty);
    EXPECT_FALSE(soe.flags.empty());
}

TEST(Answer, GroundedYes) {
    Bench b({answer_turn("", "Yes", "Exacerbations fell [PMID: 1].")});
    auto ctx = b.ctx();
    synth::SummaryOfEvidence soe;
    soe.text = "Exacerbations fell [PMID: 1].";
    soe.cited_pmids = {"1"};
    auto r = synth::answer(ctx, leukotriene_question(), soe);
    EXPECT_EQ(r.answer, "yes");
    EXPECT_TRUE(r.evidence_grounded);
}

TEST(Answer, NoCitationsNotGrounded) {
    Bench b({answer_turn("", "no", "Nothing suggests it.")});
    auto ctx = b.ctx();
    synth::SummaryOfEvidence soe;
    soe.cited_pmids = {"1"};
    auto r = synth::answer(ctx, leukotriene_question(), soe);
    EXPECT_FALSE(r.evidence_grounded);
}

TEST(Answer, ProbablyTwiceIsFormatError) {
    Bench b({answer_turn("", "probably", "."), answer_turn("", "probably", ".")});
    auto ctx = b.ctx();
    EXPECT_THROW(synth::answer(ctx, leukotriene_question(), synth::SummaryOfEvidence{}), AnswerFormatError);
}

TEST(Answer, RationaleCitationsRestrictedToSummary) {
    Bench b({answer_turn("", "yes", "Shown [PMID: 1] and [PMID: 7].")});
    auto ctx = b.ctx();
    synth::SummaryOfEvidence soe;
    soe.cited_pmids = {"1"};
    auto r = synth::answer(ctx, leukotriene_question(), soe);
    EXPECT_EQ(r.cited_pmids, (std::set<std::string>{"1"}));
    EXPECT_EQ(r.stripped, (std::vector<std::string>{"7"}));
}

TEST(Answer, LabelNormalization) {
    std::vector<std::string> labels{"yes", "no", "maybe"};
    EXPECT_EQ(synth::normalize_label("Yes.", labels), "yes");
    EXPECT_EQ(synth::normalize_label("no, because", labels), "no");
    EXPECT_FALSE(synth::normalize_label("probably", labels));
    EXPECT_EQ(synth::normalize_label("(B)", {"A", "B", "C", "D"}), "B");
}
