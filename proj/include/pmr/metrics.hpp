#pragma once

// Per-question outcomes and benchmark-level aggregation: cost means and
// ratios, ESD histogram, accuracy, EGR, and MeSH precision/recall.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/ledger.hpp"
#include "pmr/pipeline.hpp"

namespace pmr::metrics {

struct QuestionOutcome {
    std::string id;
    bool answered = false;
    std::string answer;
    std::optional<bool> correct;  // set when a gold label exists
    bool grounded = false;
    std::optional<std::size_t> esd;  // reasoner mode only
    CostTotals cost;
    std::set<std::string> predicted_mesh;
    std::optional<std::set<std::string>> gold_mesh;
    std::string failure;

    static QuestionOutcome from_trace(const SessionTrace& t);
    nlohmann::json to_json() const;
    static QuestionOutcome from_json(const nlohmann::json& j);
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    bool guarded = false;  // an empty side forced both to 0
};

/// Case-folded exact string matching.
PrecisionRecall precision_recall(const std::set<std::string>& predicted, const std::set<std::string>& gold);

class EsdHistogram {
public:
    static constexpr std::size_t kBuckets = 6;
    static const std::array<std::string, kBuckets>& labels();  // 0, 1-5, 6-10, 11-15, 16-20, >20

    void add(std::size_t esd);
    std::size_t count(std::size_t bucket) const { return counts_.at(bucket); }
    std::size_t bucket_of(std::size_t esd) const;
    std::size_t total() const;
    bool operator==(const EsdHistogram&) const = default;

private:
    std::array<std::size_t, kBuckets> counts_{};
};

struct Means {
    double input_tokens = 0;
    double output_tokens = 0;
    double llm_calls = 0;
    double search_calls = 0;
};

struct BenchmarkAggregate {
    std::string run_id;
    std::string mode;
    std::size_t questions = 0;
    std::size_t answered = 0;
    std::size_t failures = 0;
    CostTotals totals;
    Means means;
    /// Present only when a baseline run was supplied; keys are the Means
    /// fields whose baseline value is nonzero.
    std::optional<std::string> baseline_id;
    std::map<std::string, double> ratios;
    EsdHistogram esd;
    std::size_t labelled = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    std::size_t grounded = 0;
    double egr = 0.0;
    std::size_t mesh_scored = 0;
    std::size_t mesh_guarded = 0;
    double precision = 0.0;
    double recall = 0.0;

    nlohmann::json to_json() const;
    static BenchmarkAggregate from_json(const nlohmann::json& j);
    /// Aligned text table.
    std::string table() const;
};

BenchmarkAggregate aggregate(const std::string& run_id, const std::string& mode,
                             const std::vector<QuestionOutcome>& outcomes,
                             const BenchmarkAggregate* baseline = nullptr);

/// Means of `run` divided by `baseline`, skipping zero denominators.
std::map<std::string, double> ratios(const Means& run, const Means& baseline);

}  // namespace pmr::metrics
