#pragma once

// Stage 1: candidate MeSH terms, the selected subset, and the initial query.

#include <string>
#include <vector>

#include "pmr/query.hpp"
#include "pmr/session.hpp"

namespace pmr::planner {

struct PlanResult {
    std::vector<MeshCandidate> candidates;  // full pool, selection flags set
    std::vector<MeshCandidate> selected;
    query::QueryExpr q0;
    std::string draft_rationale;
    /// Selected terms that did not make it into q0.
    std::vector<std::string> dropped_terms;
    std::vector<std::string> flags;
};

/// Deduplicated (case-folded) candidates, none selected. Throws EmptyPlan
/// when the model offers nothing twice.
std::vector<MeshCandidate> generate_candidates(SessionContext& ctx, const QuestionSpec& spec);

/// Closed-world subset of `pool`. A singleton pool is selected without a
/// model call. Throws SchemaError(BadEnum) for terms outside the pool and
/// EmptyPlan for an empty selection.
std::vector<MeshCandidate> select_candidates(SessionContext& ctx, const std::vector<MeshCandidate>& pool,
                                             const QuestionSpec& spec);

/// Normalized initial query. Syntax failures get one re-draft, then
/// PlanningFailure. The date window, if any, is enforced mechanically.
query::QueryExpr draft_initial_query(SessionContext& ctx, const std::vector<MeshCandidate>& selected,
                                     const QuestionSpec& spec, std::string* rationale = nullptr,
                                     std::vector<std::string>* dropped = nullptr);

PlanResult run_planner(SessionContext& ctx, const QuestionSpec& spec);

/// Parses, validates, applies the date window and normalizes a model-drafted
/// query string. Throws SyntaxError.
query::QueryExpr accept_draft(const std::string& raw, const QuestionSpec& spec);

/// "- term: rationale" lines.
std::string format_pool(const std::vector<MeshCandidate>& pool);

}  // namespace pmr::planner
