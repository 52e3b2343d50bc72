#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pmr {

/// Pipeline stage a cost event is attributed to.
enum class Stage {
    MeshGeneration,
    MeshSelection,
    QueryDraft,
    Critique,
    PoolUpdate,
    Refinement,
    RefinementSearch,
    RetrievalSearch,
    Filter,
    Extraction,
    Coverage,
    Summary,
    Answer,
    SelfReflection,
    Judge,
};

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);

struct CostTotals {
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
    std::uint64_t llm_calls = 0;
    std::uint64_t search_calls = 0;

    std::uint64_t tokens() const { return input_tokens + output_tokens; }
    CostTotals& operator+=(const CostTotals& o);
    bool operator==(const CostTotals&) const = default;
};

enum class CallKind { Llm, Search };

struct CallRecord {
    std::uint64_t id = 0;
    Stage stage = Stage::Answer;
    CallKind kind = CallKind::Llm;
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
    bool estimated = false;
    std::string detail;  // schema id for LLM calls, query string for searches
};

/// Per-session accounting of the four cost indicators with a per-stage
/// breakdown. Single writer; the stage sums always equal the totals.
class CostLedger {
public:
    void record_llm(Stage stage, std::uint64_t input_tokens, std::uint64_t output_tokens,
                    bool estimated, std::string detail = {});
    void record_search(Stage stage, std::string query);

    const CostTotals& totals() const { return totals_; }
    const std::map<Stage, CostTotals>& by_stage() const { return by_stage_; }
    const std::vector<CallRecord>& calls() const { return calls_; }
    std::vector<std::uint64_t> estimated_call_ids() const;

    /// Stage breakdown sums and call log both reproduce the totals.
    bool consistent() const;

    /// Totals recomputed from the call log alone.
    static CostTotals totals_from_calls(const std::vector<CallRecord>& calls);

    nlohmann::json to_json() const;
    static CostLedger from_json(const nlohmann::json& j);

private:
    void apply(const CallRecord& rec);

    CostTotals totals_;
    std::map<Stage, CostTotals> by_stage_;
    std::vector<CallRecord> calls_;
};

nlohmann::json to_json(const CostTotals& t);
CostTotals totals_from_json(const nlohmann::json& j);

}  // namespace pmr
