#include "pmr/synthesizer.hpp"

#include <map>
#include <regex>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"
#include "pmr/text.hpp"

namespace pmr::synth {

using nlohmann::json;

namespace {

const std::regex& marker_re() {
    static const std::regex re(R"(\[\s*PMID\s*:\s*\d+(?:\s*,\s*(?:PMID\s*:\s*)?\d+)*\s*\])",
                               std::regex::icase);
    return re;
}

std::vector<std::string> digits_in(const std::string& marker) {
    static const std::regex num(R"(\d+)");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(marker.begin(), marker.end(), num); it != std::sregex_iterator(); ++it)
        out.push_back(it->str());
    return out;
}

std::string quote_list(const std::vector<std::string>& ids) { return text::join(ids, ", "); }

}  // namespace

std::vector<std::string> parse_citations(std::string_view text) {
    std::string s(text);
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), marker_re()); it != std::sregex_iterator(); ++it)
        for (auto& id : digits_in(it->str())) out.push_back(std::move(id));
    return out;
}

std::string restrict_citations(std::string_view text, const std::set<std::string>& allowed,
                               std::vector<std::string>* removed) {
    std::string s(text);
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), marker_re()); it != std::sregex_iterator(); ++it) {
        auto pos = static_cast<std::size_t>(it->position());
        out.append(s, last, pos - last);
        last = pos + it->length();
        std::vector<std::string> keep;
        for (auto& id : digits_in(it->str())) {
            if (allowed.count(id)) keep.push_back(id);
            else if (removed) removed->push_back(id);
        }
        if (keep.empty()) {
            // Drop the marker together with the space that introduced it.
            if (!out.empty() && out.back() == ' ') out.pop_back();
            continue;
        }
        out += "[PMID: ";
        for (std::size_t i = 0; i < keep.size(); ++i) out += (i ? ", PMID: " : "") + keep[i];
        out += "]";
    }
    out.append(s, last, std::string::npos);
    return out;
}

std::optional<std::string> normalize_label(std::string_view answer, const std::vector<std::string>& labels) {
    auto strip = [](std::string s) {
        auto is_punct = [](unsigned char c) { return std::ispunct(c) || std::isspace(c); };
        while (!s.empty() && is_punct(s.front())) s.erase(s.begin());
        while (!s.empty() && is_punct(s.back())) s.pop_back();
        return s;
    };
    auto full = strip(text::lower(answer));
    for (const auto& l : labels)
        if (full == text::lower(l)) return l;
    std::string first;
    for (unsigned char c : full) {
        if (!std::isalnum(c)) break;
        first.push_back(static_cast<char>(c));
    }
    for (const auto& l : labels)
        if (!first.empty() && first == text::lower(l)) return l;
    return std::nullopt;
}

std::string raw_sources(const std::vector<retrieval::EvidenceItem>& pool) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> passages;
    for (const auto& e : pool) {
        if (!passages.count(e.pmid)) order.push_back(e.pmid);
        passages[e.pmid].push_back(e.passage);
    }
    std::string out;
    for (const auto& id : order) out += text::join(passages[id], " ") + " [PMID: " + id + "]\n";
    return out;
}

SummaryOfEvidence summarize(SessionContext& ctx, const std::vector<retrieval::EvidenceItem>& pool,
                            const QuestionSpec& spec) {
    (void)spec;
    SummaryOfEvidence soe;
    if (pool.empty()) {
        soe.empty = true;
        soe.flags.push_back("empty evidence pool; answering without sources");
        return soe;
    }
    std::set<std::string> pool_ids;
    for (const auto& e : pool) pool_ids.insert(e.pmid);

    auto req = prompts::build(prompts::kSummary, {{"raw_sources", raw_sources(pool)}}, Stage::Summary,
                              ctx.config.temperatures.at(Stage::Summary));
    auto invalid_in = [&](const std::string& t) {
        std::vector<std::string> bad;
        for (const auto& id : parse_citations(t))
            if (!pool_ids.count(id)) bad.push_back(id);
        return bad;
    };

    std::optional<std::string> summary;
    try {
        summary = ctx.complete(req).parsed->at("verified_sources").get<std::string>();
        if (auto bad = invalid_in(*summary); !bad.empty()) {
            soe.flags.push_back("summary cited PMIDs outside the evidence pool: " + quote_list(bad));
            req.blocks.push_back(
                {llm::Role::User,
                 prompts::corrective(schema::kSummary, "it cites PMIDs that are not among the raw sources (" +
                                                           quote_list(bad) + "); cite only the sources given")});
            try {
                summary = ctx.complete(req).parsed->at("verified_sources").get<std::string>();
            } catch (const SchemaError& e) {
                soe.flags.push_back(std::string("summary re-ask unusable: ") + e.what());
            }
        }
    } catch (const SchemaError& e) {
        soe.flags.push_back(std::string("summary unusable: ") + e.what());
    }

    if (!summary) {
        soe.mechanical = true;
        std::vector<std::string> parts;
        for (const auto& e : pool) parts.push_back(e.passage + " [PMID: " + e.pmid + "]");
        soe.text = text::join(parts, " ");
    } else {
        soe.text = restrict_citations(*summary, pool_ids, &soe.stripped);
        if (!soe.stripped.empty())
            soe.flags.push_back("stripped citations outside the evidence pool: " + quote_list(soe.stripped));
    }
    for (auto& id : parse_citations(soe.text)) soe.cited_pmids.insert(std::move(id));
    return soe;
}

FinalResponse answer(SessionContext& ctx, const QuestionSpec& spec, const SummaryOfEvidence& soe) {
    auto req = prompts::build(prompts::kQuestionAnswering,
                              {{"natural_language_question", spec.question},
                               {"task_instruction", spec.task_spec},
                               {"context", spec.context.value_or("")},
                               {"sources", soe.text}},
                              Stage::Answer, ctx.config.temperatures.at(Stage::Answer));
    FinalResponse out;
    json parsed;
    for (int attempt = 0;; ++attempt) {
        try {
            parsed = *ctx.complete(req).parsed;
        } catch (const SchemaError& e) {
            throw AnswerFormatError(std::string("answer reply unusable: ") + e.what());
        }
        auto raw = parsed.at("answer").get<std::string>();
        if (spec.labels.empty()) {
            out.answer = std::string(text::trim(raw));
            if (!out.answer.empty()) break;
        } else if (auto label = normalize_label(raw, spec.labels)) {
            out.answer = *label;
            break;
        }
        if (attempt >= 1)
            throw AnswerFormatError("answer '" + raw + "' is not one of: " + text::join(spec.labels, ", "));
        out.flags.push_back("answer '" + raw + "' outside the label set; re-asked");
        req.blocks.push_back(
            {llm::Role::User,
             prompts::corrective(schema::kAnswer, "the answer must be exactly one of: " +
                                                      (spec.labels.empty() ? std::string("a nonempty string")
                                                                           : text::join(spec.labels, ", ")))});
    }

    out.rationale = restrict_citations(parsed.value("rationale", ""), soe.cited_pmids, &out.stripped);
    if (!out.stripped.empty())
        out.flags.push_back("stripped citations outside the summary of evidence: " + quote_list(out.stripped));
    for (auto& id : parse_citations(out.rationale)) out.cited_pmids.insert(std::move(id));
    out.evidence_grounded = !out.cited_pmids.empty();
    return out;
}

}  // namespace pmr::synth
