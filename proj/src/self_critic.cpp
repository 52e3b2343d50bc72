#include "pmr/self_critic.hpp"

#include <algorithm>
#include <map>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/planner.hpp"
#include "pmr/prompts.hpp"
#include "pmr/text.hpp"

namespace pmr::critic {

using nlohmann::json;

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::Coverage: return "coverage";
        case Dimension::Alignment: return "alignment";
        case Dimension::Redundancy: return "redundancy";
    }
    return "?";
}

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::Converged: return "converged";
        case StopReason::BudgetExhausted: return "budget_exhausted";
        case StopReason::EmptyResultBroadened: return "empty_result_broadened";
        case StopReason::Aborted: return "aborted";
    }
    return "?";
}

namespace {

AggregateFeedback feedback_from(const json& fb) {
    AggregateFeedback a;
    a.coverage = fb.at("coverage").get<int>();
    a.alignment = fb.at("alignment").get<int>();
    a.redundancy = fb.at("redundancy").get<int>();
    a.coverage_suggestion = fb.value("coverage_suggestion", "");
    a.alignment_suggestion = fb.value("alignment_suggestion", "");
    a.redundancy_suggestion = fb.value("redundancy_suggestion", "");
    return a;
}

std::string signal_line(std::string_view name, int value, const std::string& suggestion) {
    std::string line = std::string(name) + ": " + std::to_string(value);
    if (!suggestion.empty()) line += " (" + suggestion + ")";
    return line + "\n";
}

std::string format_critique(const Critique& c) {
    std::map<std::string, std::vector<const CritiqueEntry*>> by_term;
    std::vector<std::string> order;
    for (const auto& e : c.entries) {
        if (!by_term.count(e.term)) order.push_back(e.term);
        by_term[e.term].push_back(&e);
    }
    std::string out;
    for (const auto& term : order) {
        out += "- " + term + ":";
        for (const auto* e : by_term[term]) {
            out += " " + std::string(to_string(e->dimension)) + "=" + (e->verdict ? "Yes" : "No");
            if (!e->rationale.empty()) out += " (" + e->rationale + ")";
            if (e->boolean_hint) out += " [boolean linkage: " + *e->boolean_hint + "]";
            out += ";";
        }
        out += "\n";
    }
    out += "Aggregate feedback:\n";
    out += signal_line("coverage", c.aggregate.coverage, c.aggregate.coverage_suggestion);
    out += signal_line("alignment", c.aggregate.alignment, c.aggregate.alignment_suggestion);
    out += signal_line("redundancy", c.aggregate.redundancy, c.aggregate.redundancy_suggestion);
    return out;
}

std::string format_history(const std::vector<query::QueryExpr>& history) {
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i)
        out += std::to_string(i + 1) + ". " + query::render_query(history[i]) + "\n";
    return out;
}

std::vector<MeshCandidate> pool_from(const json& terms) {
    std::vector<MeshCandidate> out;
    std::set<std::string> seen;
    for (const auto& t : terms) {
        auto term = t.at("term").get<std::string>();
        if (!seen.insert(text::lower(term)).second) continue;
        out.push_back({term, t.value("rationale", ""), true});
    }
    return out;
}

}  // namespace

std::string format_records(const std::vector<pubmed::ArticleRecord>& records, bool with_abstract) {
    std::string out;
    for (const auto& r : records) {
        out += "PMID: " + r.pmid + "\nTitle: " + r.title + "\n";
        if (with_abstract) out += "Abstract: " + r.abstract + "\n";
        out += "\n";
    }
    return out;
}

Critique critique(SessionContext& ctx, const RefinementState& state,
                  const std::vector<pubmed::ArticleRecord>& metadata, const QuestionSpec& spec) {
    if (state.mesh_pool.empty()) throw std::invalid_argument("critique needs a nonempty MeSH pool");
    auto req = prompts::build(prompts::kCritique,
                              {{"natural_language_question", spec.question},
                               {"context", spec.context.value_or("")},
                               {"search_query", query::render_query(state.query)},
                               {"mesh_terms", planner::format_pool(state.mesh_pool)},
                               {"search_meta", format_records(metadata)}},
                              Stage::Critique, ctx.config.temperatures.at(Stage::Critique));
    auto parsed = *ctx.complete(req).parsed;

    Critique c;
    for (const auto& t : parsed.at("terms")) {
        auto term = t.at("term").get<std::string>();
        for (auto [dim, key] : {std::pair{Dimension::Coverage, "coverage"},
                                std::pair{Dimension::Alignment, "alignment"},
                                std::pair{Dimension::Redundancy, "redundancy"}}) {
            const auto& d = t.at(key);
            CritiqueEntry e{term, dim, d.at("verdict").get<bool>(), d.value("rationale", ""), std::nullopt};
            if (dim == Dimension::Redundancy && d.contains("boolean_hint"))
                e.boolean_hint = d["boolean_hint"].get<std::string>();
            c.entries.push_back(std::move(e));
        }
    }
    c.aggregate = feedback_from(parsed.at("feedback"));
    c.aggregate_derived = parsed.value("feedback_derived", false);
    c.form = parsed.value("form", "aggregate");
    if (metadata.empty()) {
        // Nothing was retrieved, so none of the signals can be judged.
        c.aggregate.coverage = c.aggregate.alignment = c.aggregate.redundancy = -1;
        c.forced_no_context = true;
    }
    return c;
}

PoolUpdate update_pool(SessionContext& ctx, const RefinementState& state, const Critique& crit,
                       const std::vector<pubmed::ArticleRecord>& metadata, const QuestionSpec& spec) {
    PoolUpdate out;
    auto req = prompts::build(prompts::kPoolUpdate,
                              {{"natural_language_question", spec.question},
                               {"context", spec.context.value_or("")},
                               {"mesh_terms", planner::format_pool(state.mesh_pool)},
                               {"critique", format_critique(crit)},
                               {"search_meta", format_records(metadata)}},
                              Stage::PoolUpdate, ctx.config.temperatures.at(Stage::PoolUpdate));

    std::optional<json> parsed;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            parsed = *ctx.complete(req).parsed;
        } catch (const SchemaError& e) {
            out.flags.push_back(std::string("pool update unusable: ") + e.what());
            parsed.reset();
            break;
        }
        if (!parsed->at("terms").empty()) break;
        parsed.reset();
        if (attempt == 0)
            req.blocks.push_back({llm::Role::User,
                                  prompts::corrective(schema::kMeshUpdate, "the term list was empty")});
    }
    if (!parsed) {
        out.pool = state.mesh_pool;
        out.fell_back = true;
        out.flags.push_back("previous MeSH pool retained");
        return out;
    }

    out.pool = pool_from(parsed->at("terms"));
    std::map<std::string, PoolChange> model_changes;
    for (const auto& ch : parsed->at("changes"))
        model_changes[text::lower(ch.at("term").get<std::string>())] = {
            ch.at("term").get<std::string>(), ch.at("action").get<std::string>(), ch.value("into", "")};

    // Terms judged both redundant and misaligned must not survive unchanged.
    std::map<std::string, std::pair<bool, bool>> verdicts;  // redundant, aligned
    for (const auto& e : crit.entries) {
        auto& v = verdicts.try_emplace(text::lower(e.term), false, true).first->second;
        if (e.dimension == Dimension::Redundancy) v.first = e.verdict;
        if (e.dimension == Dimension::Alignment) v.second = e.verdict;
    }
    std::set<std::string> handled;
    for (const auto& old : state.mesh_pool) {
        auto key = text::lower(old.term);
        auto v = verdicts.find(key);
        if (v == verdicts.end() || !v->second.first || v->second.second) continue;
        handled.insert(key);
        auto it = std::find_if(out.pool.begin(), out.pool.end(),
                               [&](const MeshCandidate& c) { return text::lower(c.term) == key; });
        if (it == out.pool.end()) {
            auto mc = model_changes.find(key);
            if (mc != model_changes.end() && mc->second.action == "merged")
                out.changes.push_back({old.term, "merged", mc->second.into});
            else
                out.changes.push_back({old.term, "removed", ""});
        } else if (it->rationale != old.rationale) {
            out.changes.push_back({old.term, "rerationalized", ""});
        } else if (out.pool.size() > 1) {
            out.pool.erase(it);
            out.changes.push_back({old.term, "removed (enforced)", ""});
        } else {
            out.flags.push_back("kept redundant, misaligned '" + old.term + "' to avoid an empty pool");
        }
    }
    for (const auto& [key, ch] : model_changes)
        if (!handled.count(key)) out.changes.push_back(ch);
    return out;
}

std::optional<query::QueryExpr> refine_query(SessionContext& ctx, const RefinementState& state,
                                             const Critique& crit,
                                             const std::vector<pubmed::ArticleRecord>& metadata,
                                             const QuestionSpec& spec, IterationRecord& record) {
    std::string context;
    if (spec.context && !text::trim(*spec.context).empty()) context += *spec.context + "\n\n";
    context += "Current MeSH terms:\n" + planner::format_pool(state.mesh_pool) + "\n";
    context += "Critic feedback on " + query::render_query(state.query) + ":\n" + format_critique(crit);
    if (spec.date_window)
        context += "\nRestrict publication dates to " + query::render_date(*spec.date_window) + ".\n";
    context += "\nRetrieved records:\n" + (metadata.empty() ? std::string("None\n") : format_records(metadata));

    auto req = prompts::build(prompts::kSelfCritic,
                              {{"natural_language_question", spec.question},
                               {"search_meta", context},
                               {"search_history", format_history(state.history)}},
                              Stage::Refinement, ctx.config.temperatures.at(Stage::Refinement));

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string problem;
        try {
            auto parsed = *ctx.complete(req).parsed;
            auto q = planner::accept_draft(parsed.at("query").get<std::string>(), spec);
            record.refine_rationale = parsed.value("rationale", "");
            if (parsed.contains("feedback")) record.refine_feedback = feedback_from(parsed["feedback"]);
            return q;
        } catch (const SyntaxError& e) {
            problem = "the query is not valid PubMed syntax: " + e.detail();
        } catch (const SchemaError& e) {
            record.flags.push_back(std::string("refinement reply unusable: ") + e.what());
            return std::nullopt;
        }
        record.flags.push_back("refined query rejected: " + problem);
        if (attempt == 0)
            req.blocks.push_back({llm::Role::User, prompts::corrective(schema::kRefinedQuery, problem)});
    }
    return std::nullopt;
}

RefinementState run_refinement(SessionContext& ctx, const QuestionSpec& spec, const query::QueryExpr& q0,
                               const std::vector<MeshCandidate>& pool, int budget) {
    if (budget < 1) throw std::invalid_argument("refinement budget must be at least 1");
    RefinementState state;
    state.history.push_back(q0);
    state.query = q0;
    state.mesh_pool = pool;
    for (auto& c : state.mesh_pool) c.selected = true;

    const auto page = ctx.config.max_articles;
    for (int t = 1; t <= budget; ++t) {
        state.iteration = t;
        IterationRecord rec;
        rec.t = t;

        auto current = state.history.back();
        auto result = ctx.pubmed.search(current, page, ctx.ledger, Stage::RefinementSearch);
        bool broadened = false;
        while (result.empty_result() &&
               state.broadenings.size() < static_cast<std::size_t>(ctx.config.max_broadenings)) {
            auto b = query::broaden(current);
            if (!b) break;
            Broadening br{t, query::render_query(current), query::render_query(b->query), b->description, 0};
            current = b->query;
            result = ctx.pubmed.search(current, page, ctx.ledger, Stage::RefinementSearch);
            br.total_hits = result.total_hits;
            state.broadenings.push_back(std::move(br));
            broadened = true;
        }
        state.query = current;
        state.last_result = result;
        rec.searched_query = query::render_query(current);
        rec.total_hits = result.total_hits;

        if (result.empty_result() && broadened) {
            rec.flags.push_back("no records even after broadening");
            state.iterations.push_back(std::move(rec));
            state.history.push_back(current);
            state.stop = StopReason::EmptyResultBroadened;
            state.stop_detail = std::to_string(state.broadenings.size()) + " broadening(s), still no records";
            return state;
        }

        std::vector<pubmed::ArticleRecord> metadata(
            result.records.begin(), result.records.begin() + std::min(result.records.size(), page));
        rec.records_seen = metadata.size();

        try {
            rec.critique = critique(ctx, state, metadata, spec);
        } catch (const SchemaError& e) {
            rec.flags.push_back(std::string("critique unusable: ") + e.what());
            state.iterations.push_back(std::move(rec));
            state.stop = StopReason::Aborted;
            state.stop_detail = "critique failed at iteration " + std::to_string(t) + "; keeping best-so-far query";
            return state;
        }
        state.aggregate_feedback = rec.critique.aggregate;

        auto update = update_pool(ctx, state, rec.critique, metadata, spec);
        state.mesh_pool = update.pool;
        rec.pool = update.pool;
        rec.changes = update.changes;
        rec.flags.insert(rec.flags.end(), update.flags.begin(), update.flags.end());

        auto refined = refine_query(ctx, state, rec.critique, metadata, spec, rec);
        if (!refined) {
            rec.refined_query = query::render_query(current);
            rec.flags.push_back("reusing the previous query");
            state.iterations.push_back(std::move(rec));
            state.history.push_back(current);
            state.stop = StopReason::Converged;
            state.stop_detail = "refinement failed twice; previous query reused";
            return state;
        }

        rec.refined_query = query::render_query(*refined);
        bool repeat = std::any_of(state.history.begin(), state.history.end(), [&](const query::QueryExpr& h) {
            return query::render_query(h) == rec.refined_query;
        });
        state.history.push_back(*refined);
        state.iterations.push_back(std::move(rec));

        if (state.aggregate_feedback.saturated()) {
            state.stop = StopReason::Converged;
            state.stop_detail = "coverage, alignment and redundancy all satisfied at iteration " + std::to_string(t);
            break;
        }
        if (repeat) {
            state.stop = StopReason::Converged;
            state.stop_detail = "refined query repeats an earlier query at iteration " + std::to_string(t);
            break;
        }
        if (t == budget) {
            state.stop = StopReason::BudgetExhausted;
            state.stop_detail = "iteration budget of " + std::to_string(budget) + " reached";
        }
    }
    if (!state.broadenings.empty())
        state.stop_detail += "; " + std::to_string(state.broadenings.size()) + " broadening(s) applied";
    return state;
}

}  // namespace pmr::critic
