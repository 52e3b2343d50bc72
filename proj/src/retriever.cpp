#include "pmr/retriever.hpp"

#include <map>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"
#include "pmr/self_critic.hpp"
#include "pmr/text.hpp"

namespace pmr::retrieval {

using nlohmann::json;

std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::Sufficient: return "sufficient";
        case StopReason::Exhausted: return "exhausted";
        case StopReason::TokenBudget: return "token_budget";
    }
    return "?";
}

namespace {

void note(std::vector<std::string>* flags, std::string msg) {
    if (flags) flags->push_back(std::move(msg));
}

std::string pmid_of(const json& item) {
    if (!item.is_object() || !item.contains("pmid")) return {};
    const auto& p = item["pmid"];
    if (p.is_string()) return std::string(text::trim(p.get<std::string>()));
    if (p.is_number_unsigned()) return std::to_string(p.get<std::uint64_t>());
    return {};
}

std::string string_field(const json& item, const char* key) {
    if (item.contains(key) && item[key].is_string()) return item[key].get<std::string>();
    return {};
}

std::string format_pool_passages(const std::vector<EvidenceItem>& pool) {
    std::string out;
    for (const auto& e : pool) out += "[PMID: " + e.pmid + "] " + e.passage + "\n";
    return out;
}

}  // namespace

std::uint64_t retrieval_tokens(const CostLedger& ledger) {
    std::uint64_t total = 0;
    for (auto s : {Stage::Filter, Stage::Extraction, Stage::Coverage}) {
        auto it = ledger.by_stage().find(s);
        if (it != ledger.by_stage().end()) total += it->second.tokens();
    }
    return total;
}

std::vector<FilterVerdict> coarse_filter(SessionContext& ctx, const std::vector<pubmed::ArticleRecord>& records,
                                         const QuestionSpec& spec, std::size_t m_max,
                                         std::vector<std::string>* flags) {
    std::vector<pubmed::ArticleRecord> screened(records.begin(),
                                                records.begin() + std::min(records.size(), m_max));
    std::vector<FilterVerdict> out;
    if (screened.empty()) return out;

    auto req = prompts::build(prompts::kCoarseFilter,
                              {{"natural_language_question", spec.question},
                               {"records", critic::format_records(screened)}},
                              Stage::Filter, ctx.config.temperatures.at(Stage::Filter));
    std::map<std::string, std::pair<bool, std::string>> replies;
    try {
        auto parsed = *ctx.complete(req).parsed;
        for (const auto& v : parsed.at("verdicts")) {
            auto pmid = pmid_of(v);
            auto keep = v.is_object() && v.contains("keep") ? schema::yes_no(v["keep"]) : std::nullopt;
            if (pmid.empty() || !keep) continue;
            replies.emplace(pmid, std::pair{*keep, string_field(v, "rationale")});
        }
    } catch (const SchemaError& e) {
        note(flags, std::string("screening reply unusable, keeping every record: ") + e.what());
    }

    for (const auto& r : screened) {
        auto it = replies.find(r.pmid);
        if (it == replies.end()) {
            out.push_back({r.pmid, true, "no verdict returned", true});
            note(flags, "no screening verdict for PMID " + r.pmid + "; kept");
        } else {
            out.push_back({r.pmid, it->second.first, it->second.second, false});
        }
    }
    return out;
}

std::vector<EvidenceItem> extract_batch(SessionContext& ctx, const std::vector<pubmed::ArticleRecord>& batch,
                                        const QuestionSpec& spec, std::size_t batch_index,
                                        std::vector<std::string>* flags) {
    if (batch.empty()) throw std::invalid_argument("extract_batch needs at least one record");
    auto req = prompts::build(prompts::kEvidenceExtraction,
                              {{"natural_language_question", spec.question},
                               {"records", critic::format_records(batch)}},
                              Stage::Extraction, ctx.config.temperatures.at(Stage::Extraction));
    std::map<std::string, json> replies;
    try {
        auto parsed = *ctx.complete(req).parsed;
        for (const auto& item : parsed.at("items")) {
            auto pmid = pmid_of(item);
            if (!pmid.empty()) replies.emplace(pmid, item);
        }
    } catch (const SchemaError& e) {
        note(flags, std::string("extraction reply unusable: ") + e.what());
    }

    std::vector<EvidenceItem> out;
    for (const auto& r : batch) {
        EvidenceItem e{r.pmid, "", false, "extraction failed", batch_index};
        auto it = replies.find(r.pmid);
        if (it == replies.end()) {
            note(flags, "no extraction for PMID " + r.pmid);
            out.push_back(std::move(e));
            continue;
        }
        const auto& item = it->second;
        auto aligned = item.contains("aligned") ? schema::yes_no(item["aligned"]) : std::nullopt;
        if (!aligned) {
            note(flags, "extraction for PMID " + r.pmid + " lacks a yes/no alignment verdict");
            out.push_back(std::move(e));
            continue;
        }
        e.passage = std::string(text::trim(string_field(item, "passage")));
        e.rationale = string_field(item, "rationale");
        e.aligned = *aligned;
        if (e.aligned && e.passage.empty()) {
            e.aligned = false;
            note(flags, "PMID " + r.pmid + " marked aligned with an empty passage; treated as not aligned");
        }
        out.push_back(std::move(e));
    }
    return out;
}

CoverageVerdict coverage_check(SessionContext& ctx, const std::vector<EvidenceItem>& pool,
                               const QuestionSpec& spec) {
    auto req = prompts::build(prompts::kReflectiveRetrieval,
                              {{"natural_language_question", spec.question},
                               {"search_results_str", format_pool_passages(pool)},
                               {"context", spec.context.value_or("")}},
                              Stage::Coverage, ctx.config.temperatures.at(Stage::Coverage));
    CoverageVerdict v;
    try {
        auto parsed = *ctx.complete(req).parsed;
        v.is_sufficient = parsed.at("is_sufficient").get<bool>();
        v.rationale = parsed.value("rationale", "");
        for (const auto& p : parsed.at("needed_pmids")) v.needed_pmids.push_back(p.get<std::string>());
    } catch (const SchemaError& e) {
        v.is_sufficient = false;
        v.defaulted = true;
        v.rationale = std::string("coverage reply unusable: ") + e.what();
    }
    return v;
}

RetrievalOutcome run_retrieval(SessionContext& ctx, const pubmed::SearchResult& result, const QuestionSpec& spec) {
    const auto m = ctx.config.batch_size;
    const auto m_max = ctx.config.max_articles;
    if (m < 1) throw std::invalid_argument("batch size must be at least 1");

    RetrievalOutcome out;
    out.verdicts = coarse_filter(ctx, result.records, spec, m_max, &out.flags);
    std::map<std::string, bool> keep;
    for (const auto& v : out.verdicts) keep[v.pmid] = v.keep;
    for (const auto& r : result.records)
        if (auto it = keep.find(r.pmid); it != keep.end() && it->second) out.kept.push_back(r);

    int zero_streak = 0;
    for (std::size_t start = 0; start < out.kept.size(); start += m) {
        BatchRecord batch;
        batch.index = out.batches.size() + 1;
        std::vector<pubmed::ArticleRecord> records(out.kept.begin() + start,
                                                   out.kept.begin() + std::min(out.kept.size(), start + m));
        for (const auto& r : records) batch.pmids.push_back(r.pmid);

        auto items = extract_batch(ctx, records, spec, batch.index, &batch.flags);
        for (auto& e : items) {
            if (e.aligned) {
                out.pool.push_back(e);
                ++batch.aligned;
            }
            out.items.push_back(std::move(e));
        }
        batch.coverage = coverage_check(ctx, out.pool, spec);
        if (batch.coverage.defaulted) batch.flags.push_back(batch.coverage.rationale);
        batch.cumulative_tokens = retrieval_tokens(ctx.ledger);

        out.esd += records.size();
        out.batches_processed = batch.index;
        zero_streak = batch.aligned == 0 ? zero_streak + 1 : 0;
        bool sufficient = batch.coverage.is_sufficient;
        auto tokens = batch.cumulative_tokens;
        out.batches.push_back(std::move(batch));

        if (sufficient) {
            out.stop_reason = StopReason::Sufficient;
            return out;
        }
        if (ctx.config.token_budget && tokens >= *ctx.config.token_budget) {
            out.stop_reason = StopReason::TokenBudget;
            return out;
        }
        if (ctx.config.diminishing_streak > 0 && zero_streak >= ctx.config.diminishing_streak &&
            start + m < out.kept.size()) {
            out.stop_reason = StopReason::Exhausted;
            out.diminishing = true;
            out.flags.push_back("diminishing: " + std::to_string(zero_streak) +
                                " consecutive batches without aligned evidence");
            return out;
        }
    }
    out.stop_reason = StopReason::Exhausted;
    return out;
}

}  // namespace pmr::retrieval
