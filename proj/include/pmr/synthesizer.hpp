#pragma once

// Summary-of-Evidence and final answer generation with PMID citations.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmr/retriever.hpp"
#include "pmr/session.hpp"

namespace pmr::synth {

/// PMIDs in `[PMID: a]` / `[PMID: a, PMID: b]` / `[PMID: a, b]` markers, in order of appearance.
std::vector<std::string> parse_citations(std::string_view text);

/// Rewrites markers to keep only allowed PMIDs; markers left empty are removed.
/// Disallowed PMIDs are appended to `removed`.
std::string restrict_citations(std::string_view text, const std::set<std::string>& allowed,
                               std::vector<std::string>* removed = nullptr);

struct SummaryOfEvidence {
    std::string text;
    std::set<std::string> cited_pmids;
    bool empty = false;       // nothing to summarize
    bool mechanical = false;  // model summary unusable; concatenated passages instead
    std::vector<std::string> stripped;  // hallucinated PMIDs removed from the text
    std::vector<std::string> flags;
};

struct FinalResponse {
    std::string answer;
    std::string rationale;
    std::set<std::string> cited_pmids;
    bool evidence_grounded = false;
    std::vector<std::string> stripped;
    std::vector<std::string> flags;
};

/// Maps a free-form answer onto `labels` (case-insensitive; tolerates
/// punctuation and trailing explanation). nullopt when nothing matches.
std::optional<std::string> normalize_label(std::string_view answer, const std::vector<std::string>& labels);

/// "passage [PMID: id]" per pool item, grouped by article.
std::string raw_sources(const std::vector<retrieval::EvidenceItem>& pool);

SummaryOfEvidence summarize(SessionContext& ctx, const std::vector<retrieval::EvidenceItem>& pool,
                            const QuestionSpec& spec);

/// Citations outside the SoE are stripped. Throws AnswerFormatError when the
/// label is still outside the declared set after one re-ask.
FinalResponse answer(SessionContext& ctx, const QuestionSpec& spec, const SummaryOfEvidence& soe);

}  // namespace pmr::synth
