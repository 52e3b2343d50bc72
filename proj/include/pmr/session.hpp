#pragma once

// Values shared by every pipeline stage of one question-answering session.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pmr/ledger.hpp"
#include "pmr/llm.hpp"
#include "pmr/pubmed.hpp"
#include "pmr/query.hpp"

namespace pmr {

struct MeshCandidate {
    std::string term;
    std::string rationale;
    bool selected = false;
};

/// One question plus its task instruction. Gold fields are only set by the
/// evaluation harness.
struct QuestionSpec {
    std::string id;
    std::string question;
    std::string task_spec;
    std::optional<std::string> context;
    std::optional<query::DateRange> date_window;
    /// Declared answer labels ("yes","no","maybe" or "A".."D"); empty means free-form.
    std::vector<std::string> labels;
    std::optional<std::string> gold_label;
    std::optional<std::set<std::string>> gold_mesh;
};

inline const std::string kYesNoMaybeInstruction =
    "Answer the question with exactly one of: yes, no, maybe.";

struct Temperatures {
    std::map<Stage, double> by_stage;

    double at(Stage s) const {
        auto it = by_stage.find(s);
        return it == by_stage.end() ? 0.0 : it->second;
    }
};

struct PipelineConfig {
    std::size_t batch_size = 5;      // m
    std::size_t max_articles = 20;   // M_max, also the critic metadata page
    std::optional<std::uint64_t> token_budget;  // unset: unlimited
    int refinement_budget = 3;       // T
    int max_broadenings = 2;
    /// Consecutive zero-yield batches that end retrieval early; 0 disables.
    int diminishing_streak = 2;
    int self_reflection_rounds = 3;
    Temperatures temperatures;
};

/// Everything a stage needs to talk to the outside world. The ledger belongs
/// to exactly one session.
struct SessionContext {
    llm::LlmGateway& llm;
    pubmed::PubMedGateway& pubmed;
    CostLedger& ledger;
    const PipelineConfig& config;
    std::string session_id;

    llm::ChatResponse complete(llm::ChatRequest req) {
        req.session_id = session_id;
        return llm.complete(std::move(req), ledger);
    }
};

}  // namespace pmr
