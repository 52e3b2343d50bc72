#pragma once

// Benchmark runs over a dataset in one of the four modes, run artifacts on
// disk, and the pairwise judging protocol over two finished runs.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/judge.hpp"
#include "pmr/metrics.hpp"
#include "pmr/pipeline.hpp"

namespace pmr::harness {

struct RunOptions {
    Mode mode = Mode::Reasoner;
    std::string run_id = "run";
    int parallelism = 1;
    nlohmann::json resolved_config = nlohmann::json::object();
};

struct RunArtifact {
    std::string run_id;
    Mode mode = Mode::Reasoner;
    std::vector<SessionTrace> traces;  // sorted by question id
    std::vector<metrics::QuestionOutcome> outcomes;
    metrics::BenchmarkAggregate aggregate;
};

/// Runs every question with its own ledger. Per-question failures are
/// recorded in the trace and the run continues.
RunArtifact run_mode(const std::vector<QuestionSpec>& questions, llm::LlmGateway& llm,
                     pubmed::PubMedGateway& pubmed, const PipelineConfig& config, const RunOptions& options,
                     const metrics::BenchmarkAggregate* baseline = nullptr);

/// Output record: {id, answer, rationale, citations, ledger, stop_reasons, ...}.
nlohmann::json response_record(const SessionTrace& t);

/// traces/<id>.trace.json, responses.jsonl, outcomes.jsonl, aggregate.jsonl, aggregate.txt
void write_artifact(const RunArtifact& run, const std::filesystem::path& dir);

/// Loads aggregate.jsonl from a run directory, or the given aggregate file.
metrics::BenchmarkAggregate load_aggregate(const std::filesystem::path& path);

/// responses.jsonl keyed by id.
std::map<std::string, nlohmann::json> load_responses(const std::filesystem::path& run_dir);

struct JudgeOptions {
    unsigned seed = 20240501;
    bool allow_same_model = false;
    std::string label_a = "A";
    std::string label_b = "B";
};

struct JudgeReport {
    std::vector<judge::JudgedPair> pairs;
    judge::JudgeSummary summary;
    CostLedger ledger;  // judge calls only, kept apart from pipeline ledgers
};

/// Judges questions both runs answered with the gold label. Presentation
/// order is drawn per pair from a generator seeded with `seed`, in id order.
/// Throws ConfigError when the judge shares a model with either run.
JudgeReport run_judge(const std::vector<QuestionSpec>& questions, const std::map<std::string, nlohmann::json>& run_a,
                      const std::map<std::string, nlohmann::json>& run_b, llm::LlmGateway& judge,
                      const JudgeOptions& options);

/// Answer text shown to the judge.
std::string judge_text(const nlohmann::json& response);

}  // namespace pmr::harness
