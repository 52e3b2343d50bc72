#include "pmr/ledger.hpp"

#include <array>
#include <utility>

#include "pmr/error.hpp"

namespace pmr {

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 15> kStageNames{{
    {Stage::MeshGeneration, "mesh_generation"},
    {Stage::MeshSelection, "mesh_selection"},
    {Stage::QueryDraft, "query_draft"},
    {Stage::Critique, "critique"},
    {Stage::PoolUpdate, "pool_update"},
    {Stage::Refinement, "refinement"},
    {Stage::RefinementSearch, "refinement_search"},
    {Stage::RetrievalSearch, "retrieval_search"},
    {Stage::Filter, "filter"},
    {Stage::Extraction, "extraction"},
    {Stage::Coverage, "coverage"},
    {Stage::Summary, "summary"},
    {Stage::Answer, "answer"},
    {Stage::SelfReflection, "self_reflection"},
    {Stage::Judge, "judge"},
}};

}  // namespace

std::string_view to_string(Stage s) {
    for (const auto& [stage, name] : kStageNames)
        if (stage == s) return name;
    return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view s) {
    for (const auto& [stage, name] : kStageNames)
        if (name == s) return stage;
    return std::nullopt;
}

CostTotals& CostTotals::operator+=(const CostTotals& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    llm_calls += o.llm_calls;
    search_calls += o.search_calls;
    return *this;
}

void CostLedger::apply(const CallRecord& rec) {
    CostTotals delta;
    if (rec.kind == CallKind::Llm) {
        delta.input_tokens = rec.input_tokens;
        delta.output_tokens = rec.output_tokens;
        delta.llm_calls = 1;
    } else {
        delta.search_calls = 1;
    }
    totals_ += delta;
    by_stage_[rec.stage] += delta;
    calls_.push_back(rec);
}

void CostLedger::record_llm(Stage stage, std::uint64_t input_tokens, std::uint64_t output_tokens,
                            bool estimated, std::string detail) {
    apply(CallRecord{calls_.size() + 1, stage, CallKind::Llm, input_tokens, output_tokens,
                     estimated, std::move(detail)});
}

void CostLedger::record_search(Stage stage, std::string query) {
    apply(CallRecord{calls_.size() + 1, stage, CallKind::Search, 0, 0, false, std::move(query)});
}

std::vector<std::uint64_t> CostLedger::estimated_call_ids() const {
    std::vector<std::uint64_t> ids;
    for (const auto& c : calls_)
        if (c.estimated) ids.push_back(c.id);
    return ids;
}

CostTotals CostLedger::totals_from_calls(const std::vector<CallRecord>& calls) {
    CostTotals t;
    for (const auto& c : calls) {
        if (c.kind == CallKind::Llm) {
            t.input_tokens += c.input_tokens;
            t.output_tokens += c.output_tokens;
            ++t.llm_calls;
        } else {
            ++t.search_calls;
        }
    }
    return t;
}

bool CostLedger::consistent() const {
    CostTotals sum;
    for (const auto& [stage, t] : by_stage_) sum += t;
    return sum == totals_ && totals_from_calls(calls_) == totals_;
}

nlohmann::json to_json(const CostTotals& t) {
    return {{"input_tokens", t.input_tokens},
            {"output_tokens", t.output_tokens},
            {"llm_calls", t.llm_calls},
            {"search_calls", t.search_calls}};
}

CostTotals totals_from_json(const nlohmann::json& j) {
    CostTotals t;
    t.input_tokens = j.at("input_tokens").get<std::uint64_t>();
    t.output_tokens = j.at("output_tokens").get<std::uint64_t>();
    t.llm_calls = j.at("llm_calls").get<std::uint64_t>();
    t.search_calls = j.at("search_calls").get<std::uint64_t>();
    return t;
}

nlohmann::json CostLedger::to_json() const {
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [stage, t] : by_stage_) stages[std::string(pmr::to_string(stage))] = pmr::to_json(t);
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& c : calls_) {
        calls.push_back({{"id", c.id},
                         {"stage", pmr::to_string(c.stage)},
                         {"kind", c.kind == CallKind::Llm ? "llm" : "search"},
                         {"input_tokens", c.input_tokens},
                         {"output_tokens", c.output_tokens},
                         {"estimated", c.estimated},
                         {"detail", c.detail}});
    }
    return {{"totals", pmr::to_json(totals_)},
            {"stages", std::move(stages)},
            {"calls", std::move(calls)},
            {"estimated_call_ids", estimated_call_ids()}};
}

CostLedger CostLedger::from_json(const nlohmann::json& j) {
    CostLedger ledger;
    for (const auto& c : j.at("calls")) {
        auto stage = stage_from_string(c.at("stage").get<std::string>());
        if (!stage) throw TraceFormatError("unknown ledger stage " + c.at("stage").dump());
        CallRecord rec;
        rec.id = c.at("id").get<std::uint64_t>();
        rec.stage = *stage;
        rec.kind = c.at("kind").get<std::string>() == "llm" ? CallKind::Llm : CallKind::Search;
        rec.input_tokens = c.at("input_tokens").get<std::uint64_t>();
        rec.output_tokens = c.at("output_tokens").get<std::uint64_t>();
        rec.estimated = c.at("estimated").get<bool>();
        rec.detail = c.at("detail").get<std::string>();
        ledger.apply(rec);
    }
    return ledger;
}

}  // namespace pmr
