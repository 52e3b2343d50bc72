#include "pmr/planner.hpp"

#include <map>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"
#include "pmr/text.hpp"

namespace pmr::planner {

using nlohmann::json;

namespace {

std::vector<MeshCandidate> dedup_terms(const json& terms) {
    std::vector<MeshCandidate> out;
    std::set<std::string> seen;
    for (const auto& t : terms) {
        auto term = t.at("term").get<std::string>();
        if (!seen.insert(text::lower(term)).second) continue;
        out.push_back({term, t.value("rationale", ""), false});
    }
    return out;
}

std::string draft_context(const std::vector<MeshCandidate>& selected, const QuestionSpec& spec) {
    std::string ctx;
    if (spec.context && !text::trim(*spec.context).empty()) ctx += *spec.context + "\n\n";
    ctx += "Selected MeSH terms:\n" + format_pool(selected);
    if (spec.date_window)
        ctx += "\nRestrict publication dates to " + query::render_date(*spec.date_window) + ".";
    return ctx;
}

}  // namespace

std::string format_pool(const std::vector<MeshCandidate>& pool) {
    std::string out;
    for (const auto& c : pool) {
        out += "- " + c.term;
        if (!c.rationale.empty()) out += ": " + c.rationale;
        out += "\n";
    }
    return out;
}

query::QueryExpr accept_draft(const std::string& raw, const QuestionSpec& spec) {
    auto q = query::parse_query(raw);
    if (auto problem = query::validate(q)) throw SyntaxError(0, *problem);
    if (spec.date_window) query::enforce_date_window(q, *spec.date_window);
    return query::normalize_query(q);
}

std::vector<MeshCandidate> generate_candidates(SessionContext& ctx, const QuestionSpec& spec) {
    auto req = prompts::build(prompts::kMeshGeneration,
                              {{"natural_language_question", spec.question},
                               {"context", spec.context.value_or("")}},
                              Stage::MeshGeneration, ctx.config.temperatures.at(Stage::MeshGeneration));
    auto pool = dedup_terms(ctx.complete(req).parsed->at("terms"));
    if (pool.empty()) {
        req.blocks.push_back({llm::Role::User, prompts::corrective(schema::kMeshCandidates,
                                                                   "the term list was empty")});
        pool = dedup_terms(ctx.complete(req).parsed->at("terms"));
    }
    if (pool.empty()) throw EmptyPlan("no MeSH candidates proposed");
    return pool;
}

std::vector<MeshCandidate> select_candidates(SessionContext& ctx, const std::vector<MeshCandidate>& pool,
                                             const QuestionSpec& spec) {
    if (pool.empty()) throw EmptyPlan("cannot select from an empty pool");
    if (pool.size() == 1) {
        auto only = pool.front();
        only.selected = true;
        return {only};
    }
    auto req = prompts::build(prompts::kMeshSelection,
                              {{"natural_language_question", spec.question},
                               {"context", spec.context.value_or("")},
                               {"candidates", format_pool(pool)}},
                              Stage::MeshSelection, ctx.config.temperatures.at(Stage::MeshSelection));
    auto parsed = ctx.complete(req).parsed;

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.size(); ++i) index.emplace(text::lower(pool[i].term), i);
    std::vector<bool> chosen(pool.size(), false);
    for (const auto& t : parsed->at("selected")) {
        auto it = index.find(text::lower(t.get<std::string>()));
        if (it == index.end())
            throw SchemaError(SchemaError::Kind::BadEnum,
                              "selected term '" + t.get<std::string>() + "' is not a candidate");
        chosen[it->second] = true;
    }
    std::vector<MeshCandidate> out;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (chosen[i]) {
            out.push_back(pool[i]);
            out.back().selected = true;
        }
    if (out.empty()) throw EmptyPlan("model selected no MeSH terms");
    return out;
}

query::QueryExpr draft_initial_query(SessionContext& ctx, const std::vector<MeshCandidate>& selected,
                                     const QuestionSpec& spec, std::string* rationale,
                                     std::vector<std::string>* dropped) {
    if (selected.empty()) throw EmptyPlan("no selected terms to draft from");
    auto req = prompts::build(prompts::kQueryGeneration,
                              {{"natural_language_question", spec.question},
                               {"context", draft_context(selected, spec)}},
                              Stage::QueryDraft, ctx.config.temperatures.at(Stage::QueryDraft));

    std::optional<query::QueryExpr> q;
    for (int attempt = 0; attempt < 2 && !q; ++attempt) {
        auto parsed = *ctx.complete(req).parsed;
        try {
            q = accept_draft(parsed.at("query").get<std::string>(), spec);
            if (rationale) *rationale = parsed.value("rationale", "");
        } catch (const SyntaxError& e) {
            if (attempt == 1) throw PlanningFailure("initial query did not parse twice: " + e.detail());
            req.blocks.push_back({llm::Role::User,
                                  prompts::corrective(schema::kQuery, "the query is not valid PubMed syntax: " +
                                                                          e.detail())});
        }
    }

    if (dropped) {
        auto present = query::mesh_terms_of(*q);
        for (const auto& c : selected)
            if (!present.count(text::lower(c.term))) dropped->push_back(c.term);
    }
    return *q;
}

PlanResult run_planner(SessionContext& ctx, const QuestionSpec& spec) {
    PlanResult plan;
    plan.candidates = generate_candidates(ctx, spec);
    plan.selected = select_candidates(ctx, plan.candidates, spec);
    std::set<std::string> chosen;
    for (const auto& c : plan.selected) chosen.insert(text::lower(c.term));
    for (auto& c : plan.candidates) c.selected = chosen.count(text::lower(c.term)) > 0;
    if (plan.candidates.size() == 1) plan.flags.push_back("singleton pool selected without a model call");

    plan.q0 = draft_initial_query(ctx, plan.selected, spec, &plan.draft_rationale, &plan.dropped_terms);
    if (!plan.dropped_terms.empty())
        plan.flags.push_back("selected terms dropped by the draft: " + text::join(plan.dropped_terms, ", "));
    return plan;
}

}  // namespace pmr::planner
