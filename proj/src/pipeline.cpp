#include "pmr/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"
#include "pmr/text.hpp"

namespace pmr {

using nlohmann::json;

std::string_view to_string(Mode m) {
    switch (m) {
        case Mode::Reasoner: return "reasoner";
        case Mode::LlmOnly: return "llm_only";
        case Mode::OneShotRag: return "one_shot_rag";
        case Mode::SelfReflection: return "self_reflection";
    }
    return "?";
}

std::optional<Mode> mode_from_string(std::string_view s) {
    for (auto m : {Mode::Reasoner, Mode::LlmOnly, Mode::OneShotRag, Mode::SelfReflection})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::vector<std::string> SessionTrace::stop_reasons() const {
    std::vector<std::string> out;
    if (refinement) out.push_back("refinement:" + std::string(critic::to_string(refinement->stop)));
    if (retrieval) out.push_back("retrieval:" + std::string(retrieval::to_string(retrieval->stop_reason)));
    if (!reflection_stop.empty()) out.push_back("self_reflection:" + reflection_stop);
    if (failure) out.push_back("failure:" + failure->kind);
    return out;
}

std::set<std::string> SessionTrace::pool_pmids() const {
    std::set<std::string> out;
    for (const auto& e : pool) out.insert(e.pmid);
    return out;
}

std::set<std::string> SessionTrace::predicted_mesh() const {
    if (!final_query) return {};
    try {
        return query::mesh_terms_of(query::parse_query(*final_query));
    } catch (const SyntaxError&) {
        return {};
    }
}

std::vector<retrieval::EvidenceItem> records_as_evidence(const std::vector<pubmed::ArticleRecord>& records) {
    std::vector<retrieval::EvidenceItem> out;
    for (const auto& r : records) {
        std::string passage = r.title;
        if (!r.abstract.empty()) passage += (passage.empty() ? "" : " ") + r.abstract;
        passage = text::squeeze(passage);
        if (passage.empty()) continue;
        out.push_back({r.pmid, passage, true, "retrieved record", 0});
    }
    return out;
}

namespace {

query::QueryExpr generate_query(SessionContext& ctx, const QuestionSpec& spec) {
    std::string context = spec.context.value_or("");
    if (spec.date_window)
        context += std::string(context.empty() ? "" : "\n\n") + "Restrict publication dates to " +
                   query::render_date(*spec.date_window) + ".";
    auto req = prompts::build(prompts::kQueryGeneration,
                              {{"natural_language_question", spec.question}, {"context", context}},
                              Stage::QueryDraft, ctx.config.temperatures.at(Stage::QueryDraft));
    for (int attempt = 0;; ++attempt) {
        auto parsed = *ctx.complete(req).parsed;
        try {
            return planner::accept_draft(parsed.at("query").get<std::string>(), spec);
        } catch (const SyntaxError& e) {
            if (attempt == 1) throw PlanningFailure("query did not parse twice: " + e.detail());
            req.blocks.push_back({llm::Role::User,
                                  prompts::corrective(schema::kQuery, "the query is not valid PubMed syntax: " +
                                                                          e.detail())});
        }
    }
}

void search_into(SessionTrace& t, SessionContext& ctx, const query::QueryExpr& q) {
    auto result = ctx.pubmed.search(q, ctx.config.max_articles, ctx.ledger, Stage::RetrievalSearch);
    t.final_query = query::render_query(q);
    t.final_hits = result.total_hits;
    t.retrieved_pmids.clear();
    for (const auto& r : result.records) t.retrieved_pmids.push_back(r.pmid);
    auto fresh = records_as_evidence(result.records);
    auto have = t.pool_pmids();
    for (auto& e : fresh)
        if (have.insert(e.pmid).second) t.pool.push_back(std::move(e));
}

void run_reasoner(SessionTrace& t, SessionContext& ctx, const QuestionSpec& spec) {
    t.plan = planner::run_planner(ctx, spec);
    t.refinement = critic::run_refinement(ctx, spec, t.plan->q0, t.plan->selected, ctx.config.refinement_budget);

    const auto& q_star = t.refinement->q_star();
    auto rendered = query::render_query(q_star);
    pubmed::SearchResult result;
    const auto& iters = t.refinement->iterations;
    if (t.refinement->last_result && !iters.empty() && iters.back().searched_query == rendered) {
        result = *t.refinement->last_result;
        t.reused_last_search = true;
    } else {
        result = ctx.pubmed.search(q_star, ctx.config.max_articles, ctx.ledger, Stage::RetrievalSearch);
    }
    t.final_query = rendered;
    t.final_hits = result.total_hits;
    for (const auto& r : result.records) t.retrieved_pmids.push_back(r.pmid);

    t.retrieval = retrieval::run_retrieval(ctx, result, spec);
    t.pool = t.retrieval->pool;
    t.soe = synth::summarize(ctx, t.pool, spec);
    t.response = synth::answer(ctx, spec, *t.soe);
}

void run_rag(SessionTrace& t, SessionContext& ctx, const QuestionSpec& spec) {
    search_into(t, ctx, generate_query(ctx, spec));
    t.soe = synth::summarize(ctx, t.pool, spec);
    t.response = synth::answer(ctx, spec, *t.soe);
}

void run_self_reflection(SessionTrace& t, SessionContext& ctx, const QuestionSpec& spec) {
    run_rag(t, ctx, spec);
    std::vector<std::string> history{*t.final_query};
    t.reflection_stop = "budget";
    for (int round = 1; round <= ctx.config.self_reflection_rounds; ++round) {
        std::string hist;
        for (std::size_t i = 0; i < history.size(); ++i) hist += std::to_string(i + 1) + ". " + history[i] + "\n";
        auto req = prompts::build(prompts::kSelfReflection,
                                  {{"natural_language_question", spec.question},
                                   {"verified_sources", t.soe->text},
                                   {"rationale_answer", "Answer: " + t.response->answer +
                                                            "\nRationale: " + t.response->rationale},
                                   {"search_history", hist}},
                                  Stage::SelfReflection, ctx.config.temperatures.at(Stage::SelfReflection));
        ReflectionRound rr;
        rr.round = round;
        std::optional<query::QueryExpr> revised;
        try {
            auto parsed = *ctx.complete(req).parsed;
            rr.rationale = parsed.value("rationale", "");
            revised = planner::accept_draft(parsed.at("query").get<std::string>(), spec);
        } catch (const SchemaError&) {
            t.reflection_stop = "unusable_reply";
            break;
        } catch (const SyntaxError&) {
            t.reflection_stop = "unparseable_query";
            break;
        }
        rr.query = query::render_query(*revised);
        if (std::find(history.begin(), history.end(), rr.query) != history.end()) {
            t.reflection_stop = "repeated_query";
            break;
        }
        history.push_back(rr.query);
        search_into(t, ctx, *revised);
        rr.total_hits = t.final_hits;
        t.soe = synth::summarize(ctx, t.pool, spec);
        t.response = synth::answer(ctx, spec, *t.soe);
        rr.soe = *t.soe;
        rr.response = *t.response;
        t.reflections.push_back(std::move(rr));
    }
}

}  // namespace

SessionTrace run_session(Mode mode, SessionContext& ctx, const QuestionSpec& spec, json resolved_config) {
    SessionTrace t;
    t.mode = mode;
    t.spec = spec;
    t.config = std::move(resolved_config);
    t.model = ctx.llm.model_name();
    try {
        switch (mode) {
            case Mode::Reasoner: run_reasoner(t, ctx, spec); break;
            case Mode::LlmOnly:
                t.soe = synth::SummaryOfEvidence{};
                t.soe->empty = true;
                t.response = synth::answer(ctx, spec, *t.soe);
                break;
            case Mode::OneShotRag: run_rag(t, ctx, spec); break;
            case Mode::SelfReflection: run_self_reflection(t, ctx, spec); break;
        }
    } catch (const PlanningFailure& e) {
        t.failure = SessionFailure{"planning_failure", e.what()};
    } catch (const EmptyPlan& e) {
        t.failure = SessionFailure{"empty_plan", e.what()};
    } catch (const NetworkError& e) {
        t.failure = SessionFailure{"network", e.what()};
    } catch (const AnswerFormatError& e) {
        t.failure = SessionFailure{"answer_format", e.what()};
    } catch (const SchemaError& e) {
        t.failure = SessionFailure{"schema", e.what()};
    } catch (const Error& e) {
        t.failure = SessionFailure{"error", e.what()};
    }
    t.ledger = ctx.ledger;
    return t;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json strings(const std::set<std::string>& v) {
    std::vector<std::string> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), text::pmid_less);
    return sorted;
}

json to_json(const MeshCandidate& c) {
    return {{"term", c.term}, {"rationale", c.rationale}, {"selected", c.selected}};
}

json to_json(const std::vector<MeshCandidate>& pool) {
    json out = json::array();
    for (const auto& c : pool) out.push_back(to_json(c));
    return out;
}

json to_json(const critic::AggregateFeedback& a) {
    return {{"coverage", a.coverage},
            {"coverage_suggestion", a.coverage_suggestion},
            {"alignment", a.alignment},
            {"alignment_suggestion", a.alignment_suggestion},
            {"redundancy", a.redundancy},
            {"redundancy_suggestion", a.redundancy_suggestion}};
}

json to_json(const critic::Critique& c) {
    json entries = json::array();
    for (const auto& e : c.entries) {
        json j = {{"term", e.term},
                  {"dimension", critic::to_string(e.dimension)},
                  {"verdict", e.verdict},
                  {"rationale", e.rationale}};
        if (e.boolean_hint) j["boolean_hint"] = *e.boolean_hint;
        entries.push_back(std::move(j));
    }
    return {{"entries", entries},
            {"aggregate", to_json(c.aggregate)},
            {"form", c.form},
            {"aggregate_derived", c.aggregate_derived},
            {"forced_no_context", c.forced_no_context}};
}

json to_json(const critic::RefinementState& s) {
    json history = json::array();
    for (const auto& q : s.history) history.push_back(query::render_query(q));
    json iterations = json::array();
    for (const auto& it : s.iterations) {
        json changes = json::array();
        for (const auto& c : it.changes) {
            json ch = {{"term", c.term}, {"action", c.action}};
            if (!c.into.empty()) ch["into"] = c.into;
            changes.push_back(std::move(ch));
        }
        json j = {{"t", it.t},
                  {"searched_query", it.searched_query},
                  {"total_hits", it.total_hits},
                  {"records_seen", it.records_seen},
                  {"critique", to_json(it.critique)},
                  {"pool", to_json(it.pool)},
                  {"changes", changes},
                  {"refined_query", it.refined_query},
                  {"refine_rationale", it.refine_rationale},
                  {"flags", it.flags}};
        if (it.refine_feedback) j["refine_feedback"] = to_json(*it.refine_feedback);
        iterations.push_back(std::move(j));
    }
    json broadenings = json::array();
    for (const auto& b : s.broadenings)
        broadenings.push_back({{"iteration", b.iteration},
                               {"from", b.from},
                               {"to", b.to},
                               {"description", b.description},
                               {"total_hits", b.total_hits}});
    return {{"history", history},
            {"iterations", iterations},
            {"broadenings", broadenings},
            {"final_pool", to_json(s.mesh_pool)},
            {"stop_reason", critic::to_string(s.stop)},
            {"stop_detail", s.stop_detail}};
}

json to_json(const retrieval::EvidenceItem& e) {
    return {{"pmid", e.pmid},
            {"passage", e.passage},
            {"aligned", e.aligned},
            {"rationale", e.rationale},
            {"batch", e.batch_index}};
}

json to_json(const std::vector<retrieval::EvidenceItem>& items) {
    json out = json::array();
    for (const auto& e : items) out.push_back(to_json(e));
    return out;
}

json to_json(const retrieval::RetrievalOutcome& r) {
    json verdicts = json::array();
    for (const auto& v : r.verdicts)
        verdicts.push_back(
            {{"pmid", v.pmid}, {"keep", v.keep}, {"rationale", v.rationale}, {"defaulted", v.defaulted}});
    json kept = json::array();
    for (const auto& a : r.kept) kept.push_back(a.pmid);
    json batches = json::array();
    for (const auto& b : r.batches)
        batches.push_back({{"index", b.index},
                           {"pmids", b.pmids},
                           {"aligned", b.aligned},
                           {"is_sufficient", b.coverage.is_sufficient},
                           {"coverage_rationale", b.coverage.rationale},
                           {"needed_pmids", b.coverage.needed_pmids},
                           {"coverage_defaulted", b.coverage.defaulted},
                           {"cumulative_tokens", b.cumulative_tokens},
                           {"flags", b.flags}});
    return {{"verdicts", verdicts},
            {"kept", kept},
            {"items", to_json(r.items)},
            {"batches", batches},
            {"batches_processed", r.batches_processed},
            {"esd", r.esd},
            {"stop_reason", retrieval::to_string(r.stop_reason)},
            {"diminishing", r.diminishing},
            {"flags", r.flags}};
}

json to_json(const synth::SummaryOfEvidence& s) {
    return {{"text", s.text},
            {"cited_pmids", strings(s.cited_pmids)},
            {"empty", s.empty},
            {"mechanical", s.mechanical},
            {"stripped", s.stripped},
            {"flags", s.flags}};
}

json to_json(const synth::FinalResponse& r) {
    return {{"answer", r.answer},
            {"rationale", r.rationale},
            {"cited_pmids", strings(r.cited_pmids)},
            {"evidence_grounded", r.evidence_grounded},
            {"stripped", r.stripped},
            {"flags", r.flags}};
}

}  // namespace

json to_json(const QuestionSpec& spec) {
    json j = {{"id", spec.id}, {"question", spec.question}, {"task_spec", spec.task_spec}, {"labels", spec.labels}};
    if (spec.context) j["context"] = *spec.context;
    if (spec.date_window) j["date_window"] = query::render_date(*spec.date_window);
    if (spec.gold_label) j["gold_label"] = *spec.gold_label;
    if (spec.gold_mesh) j["gold_mesh"] = std::vector<std::string>(spec.gold_mesh->begin(), spec.gold_mesh->end());
    return j;
}

json to_json(const SessionTrace& t) {
    json j;
    j["version"] = 1;
    j["mode"] = to_string(t.mode);
    j["model"] = t.model;
    j["question"] = to_json(t.spec);
    j["config"] = t.config;
    if (t.plan) {
        j["plan"] = {{"candidates", to_json(t.plan->candidates)},
                     {"selected", to_json(t.plan->selected)},
                     {"q0", query::render_query(t.plan->q0)},
                     {"draft_rationale", t.plan->draft_rationale},
                     {"dropped_terms", t.plan->dropped_terms},
                     {"flags", t.plan->flags}};
    }
    if (t.refinement) j["refinement"] = to_json(*t.refinement);
    if (t.final_query) {
        j["final_search"] = {{"query", *t.final_query},
                             {"total_hits", t.final_hits},
                             {"pmids", t.retrieved_pmids},
                             {"reused_refinement_result", t.reused_last_search}};
    }
    if (t.retrieval) j["retrieval"] = to_json(*t.retrieval);
    j["pool"] = to_json(t.pool);
    if (t.soe) j["summary"] = to_json(*t.soe);
    if (!t.reflections.empty() || !t.reflection_stop.empty()) {
        json rounds = json::array();
        for (const auto& r : t.reflections)
            rounds.push_back({{"round", r.round},
                              {"query", r.query},
                              {"rationale", r.rationale},
                              {"total_hits", r.total_hits},
                              {"summary", to_json(r.soe)},
                              {"response", to_json(r.response)}});
        j["self_reflection"] = {{"rounds", rounds}, {"stop", t.reflection_stop}};
    }
    if (t.response) j["response"] = to_json(*t.response);
    j["stop_reasons"] = t.stop_reasons();
    j["ledger"] = t.ledger.to_json();
    if (t.failure) j["failure"] = {{"kind", t.failure->kind}, {"message", t.failure->message}};
    return j;
}

json load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TraceFormatError("cannot read trace " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw TraceFormatError("trace " + path.string() + " is not valid JSON");
    return j;
}

std::string render_report(const json& trace) {
    try {
        for (const char* key : {"version", "mode", "question", "ledger", "stop_reasons"})
            if (!trace.contains(key)) throw TraceFormatError(std::string("trace lacks '") + key + "'");
        auto ledger = CostLedger::from_json(trace.at("ledger"));
        auto stored = totals_from_json(trace.at("ledger").at("totals"));
        if (!(stored == ledger.totals()) || !ledger.consistent())
            throw TraceFormatError("ledger totals disagree with the call log");

        std::ostringstream out;
        const auto& q = trace.at("question");
        out << "Question " << q.at("id").get<std::string>() << ": " << q.at("question").get<std::string>() << "\n";
        out << "Mode: " << trace.at("mode").get<std::string>() << "\n";
        if (trace.contains("plan")) {
            const auto& p = trace["plan"];
            std::vector<std::string> sel;
            for (const auto& c : p.at("selected")) sel.push_back(c.at("term").get<std::string>());
            out << "MeSH candidates: " << p.at("candidates").size() << ", selected: " << text::join(sel, "; ")
                << "\n";
            out << "Initial query: " << p.at("q0").get<std::string>() << "\n";
        }
        if (trace.contains("refinement")) {
            const auto& r = trace["refinement"];
            for (const auto& b : r.at("broadenings"))
                out << "  broadened (iteration " << b.at("iteration").get<int>() << "): "
                    << b.at("from").get<std::string>() << " -> " << b.at("to").get<std::string>() << " ("
                    << b.at("total_hits").get<std::size_t>() << " hits)\n";
            for (const auto& it : r.at("iterations")) {
                const auto& agg = it.at("critique").at("aggregate");
                out << "  iteration " << it.at("t").get<int>() << ": searched "
                    << it.at("searched_query").get<std::string>() << " (" << it.at("total_hits").get<std::size_t>()
                    << " hits), " << it.at("critique").at("entries").size() << " critique entries, feedback "
                    << agg.at("coverage").get<int>() << "/" << agg.at("alignment").get<int>() << "/"
                    << agg.at("redundancy").get<int>() << ", refined to " << it.at("refined_query").get<std::string>()
                    << "\n";
            }
            out << "Refinement stop: " << r.at("stop_reason").get<std::string>() << " ("
                << r.at("stop_detail").get<std::string>() << ")\n";
            std::vector<std::string> h;
            for (const auto& x : r.at("history")) h.push_back(x.get<std::string>());
            out << "History: " << text::join(h, " | ") << "\n";
        }
        if (trace.contains("final_search")) {
            const auto& f = trace["final_search"];
            out << "Final query: " << f.at("query").get<std::string>() << " (" << f.at("total_hits").get<std::size_t>()
                << " hits)\n";
        }
        if (trace.contains("retrieval")) {
            const auto& r = trace["retrieval"];
            out << "Retrieval: screened " << r.at("verdicts").size() << ", kept " << r.at("kept").size()
                << ", batches " << r.at("batches_processed").get<std::size_t>() << ", ESD "
                << r.at("esd").get<std::size_t>() << ", stop " << r.at("stop_reason").get<std::string>()
                << (r.at("diminishing").get<bool>() ? " (diminishing)" : "") << "\n";
        }
        if (trace.contains("pool")) out << "Evidence pool: " << trace["pool"].size() << " passages\n";
        if (trace.contains("summary")) {
            const auto& s = trace["summary"];
            out << "Summary: " << (s.at("empty").get<bool>() ? "(empty)" : s.at("text").get<std::string>()) << "\n";
            if (!s.at("stripped").empty()) out << "  stripped citations: " << s.at("stripped").dump() << "\n";
        }
        if (trace.contains("self_reflection")) {
            const auto& s = trace["self_reflection"];
            for (const auto& r : s.at("rounds"))
                out << "  reflection " << r.at("round").get<int>() << ": " << r.at("query").get<std::string>() << " -> "
                    << r.at("response").at("answer").get<std::string>() << "\n";
            out << "Self-reflection stop: " << s.at("stop").get<std::string>() << "\n";
        }
        if (trace.contains("response")) {
            const auto& r = trace["response"];
            out << "Answer: " << r.at("answer").get<std::string>() << "\n";
            out << "Rationale: " << r.at("rationale").get<std::string>() << "\n";
            std::vector<std::string> cited;
            for (const auto& c : r.at("cited_pmids")) cited.push_back(c.get<std::string>());
            out << "Citations: " << (cited.empty() ? "none" : text::join(cited, ", ")) << "\n";
            out << "Evidence grounded: " << (r.at("evidence_grounded").get<bool>() ? "yes" : "no") << "\n";
        }
        if (trace.contains("failure"))
            out << "Failure: " << trace["failure"].at("kind").get<std::string>() << ": "
                << trace["failure"].at("message").get<std::string>() << "\n";
        std::vector<std::string> stops;
        for (const auto& s : trace.at("stop_reasons")) stops.push_back(s.get<std::string>());
        out << "Stop reasons: " << text::join(stops, ", ") << "\n";
        const auto& t = ledger.totals();
        out << "Ledger: " << t.input_tokens << " input tokens, " << t.output_tokens << " output tokens, "
            << t.llm_calls << " LLM calls, " << t.search_calls << " search calls (verified against "
            << ledger.calls().size() << " logged calls)\n";
        return out.str();
    } catch (const json::exception& e) {
        throw TraceFormatError(std::string("malformed trace: ") + e.what());
    }
}

}  // namespace pmr
