#pragma once

// Iterative query refinement: search, critique the MeSH terms against what
// came back, revise the term pool, re-draft the query.

#include <optional>
#include <string>
#include <vector>

#include "pmr/pubmed.hpp"
#include "pmr/query.hpp"
#include "pmr/session.hpp"

namespace pmr::critic {

enum class Dimension { Coverage, Alignment, Redundancy };

std::string_view to_string(Dimension d);

struct CritiqueEntry {
    std::string term;
    Dimension dimension = Dimension::Coverage;
    bool verdict = false;
    std::string rationale;
    std::optional<std::string> boolean_hint;  // Redundancy only
};

/// Per-dimension signal in {-1, 0, 1}; -1 means "no context to judge".
struct AggregateFeedback {
    int coverage = -1;
    int alignment = -1;
    int redundancy = -1;
    std::string coverage_suggestion;
    std::string alignment_suggestion;
    std::string redundancy_suggestion;

    bool saturated() const { return coverage == 1 && alignment == 1 && redundancy == 1; }
    bool operator==(const AggregateFeedback&) const = default;
};

struct Critique {
    std::vector<CritiqueEntry> entries;
    AggregateFeedback aggregate;
    std::string form;  // per_term | aggregate | both
    bool aggregate_derived = false;
    bool forced_no_context = false;
};

struct PoolChange {
    std::string term;
    std::string action;  // removed | merged | rerationalized | added | kept | removed (enforced)
    std::string into;
};

struct PoolUpdate {
    std::vector<MeshCandidate> pool;
    std::vector<PoolChange> changes;
    bool fell_back = false;
    std::vector<std::string> flags;
};

struct Broadening {
    int iteration = 0;
    std::string from;
    std::string to;
    std::string description;
    std::size_t total_hits = 0;
};

struct IterationRecord {
    int t = 0;
    std::string searched_query;  // after any broadening
    std::size_t total_hits = 0;
    std::size_t records_seen = 0;
    Critique critique;
    std::vector<MeshCandidate> pool;
    std::vector<PoolChange> changes;
    std::string refined_query;
    std::string refine_rationale;
    std::optional<AggregateFeedback> refine_feedback;
    std::vector<std::string> flags;
};

enum class StopReason { Converged, BudgetExhausted, EmptyResultBroadened, Aborted };

std::string_view to_string(StopReason r);

struct RefinementState {
    int iteration = 0;
    std::vector<MeshCandidate> mesh_pool;
    query::QueryExpr query;
    std::vector<query::QueryExpr> history;
    std::vector<IterationRecord> iterations;
    AggregateFeedback aggregate_feedback;
    std::vector<Broadening> broadenings;
    StopReason stop = StopReason::BudgetExhausted;
    std::string stop_detail;
    /// Result of the most recent search, reusable when q* was the last query searched.
    std::optional<pubmed::SearchResult> last_result;

    const query::QueryExpr& q_star() const { return history.back(); }
};

/// "PMID / Title / Abstract" blocks for the top records.
std::string format_records(const std::vector<pubmed::ArticleRecord>& records, bool with_abstract = true);

Critique critique(SessionContext& ctx, const RefinementState& state,
                  const std::vector<pubmed::ArticleRecord>& metadata, const QuestionSpec& spec);

PoolUpdate update_pool(SessionContext& ctx, const RefinementState& state, const Critique& critique,
                       const std::vector<pubmed::ArticleRecord>& metadata, const QuestionSpec& spec);

/// Returns nullopt when the model failed to produce a parseable query twice.
std::optional<query::QueryExpr> refine_query(SessionContext& ctx, const RefinementState& state,
                                             const Critique& critique,
                                             const std::vector<pubmed::ArticleRecord>& metadata,
                                             const QuestionSpec& spec, IterationRecord& record);

RefinementState run_refinement(SessionContext& ctx, const QuestionSpec& spec, const query::QueryExpr& q0,
                               const std::vector<MeshCandidate>& pool, int budget);

}  // namespace pmr::critic
