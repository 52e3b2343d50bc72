#pragma once

// Reflective retrieval: screen the top-ranked records, read the survivors in
// rank-ordered batches, and stop once the evidence is judged sufficient.

#include <optional>
#include <string>
#include <vector>

#include "pmr/pubmed.hpp"
#include "pmr/session.hpp"

namespace pmr::retrieval {

struct FilterVerdict {
    std::string pmid;
    bool keep = true;
    std::string rationale;
    bool defaulted = false;  // no usable verdict arrived; kept conservatively
};

struct EvidenceItem {
    std::string pmid;
    std::string passage;
    bool aligned = false;
    std::string rationale;
    std::size_t batch_index = 0;  // 1-based; 0 for items not produced by a batch
};

struct CoverageVerdict {
    bool is_sufficient = false;
    std::string rationale;
    std::vector<std::string> needed_pmids;
    bool defaulted = false;
};

struct BatchRecord {
    std::size_t index = 0;  // 1-based
    std::vector<std::string> pmids;
    std::size_t aligned = 0;
    CoverageVerdict coverage;
    std::uint64_t cumulative_tokens = 0;
    std::vector<std::string> flags;
};

enum class StopReason { Sufficient, Exhausted, TokenBudget };

std::string_view to_string(StopReason r);

struct RetrievalOutcome {
    std::vector<FilterVerdict> verdicts;
    std::vector<pubmed::ArticleRecord> kept;
    std::vector<EvidenceItem> items;  // every extraction result
    std::vector<EvidenceItem> pool;   // aligned items only
    std::vector<BatchRecord> batches;
    std::size_t batches_processed = 0;
    std::size_t esd = 0;
    StopReason stop_reason = StopReason::Exhausted;
    bool diminishing = false;
    std::vector<std::string> flags;
};

std::vector<FilterVerdict> coarse_filter(SessionContext& ctx, const std::vector<pubmed::ArticleRecord>& records,
                                         const QuestionSpec& spec, std::size_t m_max,
                                         std::vector<std::string>* flags = nullptr);

std::vector<EvidenceItem> extract_batch(SessionContext& ctx, const std::vector<pubmed::ArticleRecord>& batch,
                                        const QuestionSpec& spec, std::size_t batch_index,
                                        std::vector<std::string>* flags = nullptr);

CoverageVerdict coverage_check(SessionContext& ctx, const std::vector<EvidenceItem>& pool,
                               const QuestionSpec& spec);

/// Batch size, screening depth and token budget come from ctx.config.
RetrievalOutcome run_retrieval(SessionContext& ctx, const pubmed::SearchResult& result, const QuestionSpec& spec);

/// Tokens spent by the screening, extraction and coverage stages so far.
std::uint64_t retrieval_tokens(const CostLedger& ledger);

}  // namespace pmr::retrieval
