#pragma once

// One question, end to end, in any of the four run modes, plus the audit
// trace each session leaves behind.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/planner.hpp"
#include "pmr/retriever.hpp"
#include "pmr/self_critic.hpp"
#include "pmr/session.hpp"
#include "pmr/synthesizer.hpp"

namespace pmr {

enum class Mode { Reasoner, LlmOnly, OneShotRag, SelfReflection };

std::string_view to_string(Mode m);
std::optional<Mode> mode_from_string(std::string_view s);

struct ReflectionRound {
    int round = 0;
    std::string query;
    std::string rationale;
    std::size_t total_hits = 0;
    synth::SummaryOfEvidence soe;
    synth::FinalResponse response;
};

struct SessionFailure {
    std::string kind;  // planning_failure | empty_plan | network | answer_format | schema | error
    std::string message;
};

struct SessionTrace {
    Mode mode = Mode::Reasoner;
    QuestionSpec spec;
    nlohmann::json config = nlohmann::json::object();
    std::string model;

    std::optional<planner::PlanResult> plan;
    std::optional<critic::RefinementState> refinement;
    std::optional<std::string> final_query;
    std::size_t final_hits = 0;
    std::vector<std::string> retrieved_pmids;
    bool reused_last_search = false;
    std::optional<retrieval::RetrievalOutcome> retrieval;
    std::vector<retrieval::EvidenceItem> pool;
    std::optional<synth::SummaryOfEvidence> soe;
    std::vector<ReflectionRound> reflections;
    std::string reflection_stop;
    std::optional<synth::FinalResponse> response;

    CostLedger ledger;
    std::optional<SessionFailure> failure;

    std::vector<std::string> stop_reasons() const;
    std::set<std::string> pool_pmids() const;
    /// Case-folded MeSH terms of the final query (empty when no query was issued).
    std::set<std::string> predicted_mesh() const;
};

/// Runs one session. Recoverable pipeline failures are recorded in
/// `trace.failure`; the ledger reflects every call made before the failure.
SessionTrace run_session(Mode mode, SessionContext& ctx, const QuestionSpec& spec,
                         nlohmann::json resolved_config = nlohmann::json::object());

nlohmann::json to_json(const SessionTrace& trace);
nlohmann::json to_json(const QuestionSpec& spec);

/// Human-readable report from a serialized trace. Pure; throws
/// TraceFormatError for malformed traces or when the stored ledger totals
/// disagree with the call log.
std::string render_report(const nlohmann::json& trace);

/// Reads and parses a trace file; TraceFormatError on unreadable/truncated input.
nlohmann::json load_trace(const std::filesystem::path& path);

/// Pool entries built directly from search records (title + abstract).
std::vector<retrieval::EvidenceItem> records_as_evidence(const std::vector<pubmed::ArticleRecord>& records);

}  // namespace pmr
