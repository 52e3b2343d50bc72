#pragma once

// Pairwise explanation-quality judging with randomized presentation order.

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/llm.hpp"

namespace pmr::judge {

struct DimensionScore {
    int score = 0;
    std::string justification;
};

/// Scores keyed by dimension name, for answers A and B, plus the verdict.
struct JudgeVerdict {
    std::map<std::string, DimensionScore> a;
    std::map<std::string, DimensionScore> b;
    std::string verdict;  // A | B | tie

    static JudgeVerdict from_envelope(const nlohmann::json& parsed);
    nlohmann::json to_json() const;
};

/// Maps a verdict given on swapped positions back onto the original A/B.
JudgeVerdict unpermute(const JudgeVerdict& presented, bool swapped);

struct JudgedPair {
    std::string id;
    bool swapped = false;
    std::optional<JudgeVerdict> verdict;  // un-permuted; empty when skipped
    std::string skip_reason;
};

/// One judge call. `judge` should be configured with a single re-ask.
JudgedPair judge_pair(llm::LlmGateway& judge, CostLedger& ledger, const std::string& id,
                      const std::string& question, const std::string& answer_a, const std::string& answer_b,
                      bool swap);

struct WinTieLoss {
    std::size_t win = 0;
    std::size_t tie = 0;
    std::size_t loss = 0;
    /// Percentages in tenths of a percent; always sum to exactly 1000 when
    /// any pair was counted.
    std::array<int, 3> tenths{};

    std::size_t total() const { return win + tie + loss; }
    double win_pct() const { return tenths[0] / 10.0; }
    double tie_pct() const { return tenths[1] / 10.0; }
    double loss_pct() const { return tenths[2] / 10.0; }
};

/// Largest-remainder apportionment of 1000 tenths over the counts.
std::array<int, 3> percent_tenths(std::size_t win, std::size_t tie, std::size_t loss);

inline const std::string kOverall = "Overall";

struct JudgeSummary {
    std::size_t judged = 0;
    std::size_t skipped = 0;
    std::size_t excluded = 0;  // at least one side missed the gold label
    /// Four dimensions (from score comparison, A's perspective) plus "Overall" (verdict).
    std::map<std::string, WinTieLoss> outcomes;
    std::map<std::string, std::pair<double, double>> mean_scores;  // (A, B) per dimension

    nlohmann::json to_json() const;
    std::string table(const std::string& label_a, const std::string& label_b) const;
};

JudgeSummary summarize(const std::vector<JudgedPair>& pairs, std::size_t excluded);

}  // namespace pmr::judge
