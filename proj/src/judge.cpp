#include "pmr/judge.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"

namespace pmr::judge {

using nlohmann::json;

JudgeVerdict JudgeVerdict::from_envelope(const json& parsed) {
    JudgeVerdict v;
    for (auto [side, target] : {std::pair{"Answer A", &v.a}, std::pair{"Answer B", &v.b}})
        for (const auto& [dim, entry] : parsed.at(side).items())
            (*target)[dim] = {entry.at("score").get<int>(), entry.value("justification", "")};
    v.verdict = parsed.at("verdict").get<std::string>();
    return v;
}

json JudgeVerdict::to_json() const {
    auto side = [](const std::map<std::string, DimensionScore>& m) {
        json j = json::object();
        for (const auto& [d, s] : m) j[d] = {{"score", s.score}, {"justification", s.justification}};
        return j;
    };
    return {{"Answer A", side(a)}, {"Answer B", side(b)}, {"verdict", verdict}};
}

JudgeVerdict unpermute(const JudgeVerdict& presented, bool swapped) {
    if (!swapped) return presented;
    JudgeVerdict v;
    v.a = presented.b;
    v.b = presented.a;
    v.verdict = presented.verdict == "A" ? "B" : presented.verdict == "B" ? "A" : presented.verdict;
    return v;
}

JudgedPair judge_pair(llm::LlmGateway& judge, CostLedger& ledger, const std::string& id,
                      const std::string& question, const std::string& answer_a, const std::string& answer_b,
                      bool swap) {
    if (answer_a.empty() || answer_b.empty()) throw std::invalid_argument("judge_pair needs two nonempty answers");
    JudgedPair out;
    out.id = id;
    out.swapped = swap;
    auto req = prompts::build(prompts::kJudge,
                              {{"natural_language_question", question},
                               {"answer_a", swap ? answer_b : answer_a},
                               {"answer_b", swap ? answer_a : answer_b}},
                              Stage::Judge, 0.0);
    req.session_id = id;
    try {
        auto parsed = *judge.complete(req, ledger).parsed;
        out.verdict = unpermute(JudgeVerdict::from_envelope(parsed), swap);
    } catch (const SchemaError& e) {
        out.skip_reason = e.what();
    }
    return out;
}

std::array<int, 3> percent_tenths(std::size_t win, std::size_t tie, std::size_t loss) {
    std::array<std::size_t, 3> counts{win, tie, loss};
    auto total = win + tie + loss;
    std::array<int, 3> out{};
    if (total == 0) return out;
    std::array<std::size_t, 3> remainder{};
    int assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        auto scaled = counts[i] * 1000;
        out[i] = static_cast<int>(scaled / total);
        remainder[i] = scaled % total;
        assigned += out[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return remainder[x] > remainder[y]; });
    for (std::size_t k = 0; assigned < 1000; ++k, ++assigned) ++out[order[k % 3]];
    return out;
}

JudgeSummary summarize(const std::vector<JudgedPair>& pairs, std::size_t excluded) {
    JudgeSummary s;
    s.excluded = excluded;
    std::map<std::string, std::pair<long, long>> score_sums;
    for (const auto& p : pairs) {
        if (!p.verdict) {
            ++s.skipped;
            continue;
        }
        ++s.judged;
        const auto& v = *p.verdict;
        for (auto dim : schema::kJudgeDimensions) {
            std::string d(dim);
            int a = v.a.at(d).score, b = v.b.at(d).score;
            auto& o = s.outcomes[d];
            (a > b ? o.win : a < b ? o.loss : o.tie) += 1;
            score_sums[d].first += a;
            score_sums[d].second += b;
        }
        auto& o = s.outcomes[kOverall];
        (v.verdict == "A" ? o.win : v.verdict == "B" ? o.loss : o.tie) += 1;
    }
    for (auto& [d, o] : s.outcomes) o.tenths = percent_tenths(o.win, o.tie, o.loss);
    for (const auto& [d, sums] : score_sums)
        s.mean_scores[d] = {static_cast<double>(sums.first) / static_cast<double>(s.judged),
                            static_cast<double>(sums.second) / static_cast<double>(s.judged)};
    return s;
}

json JudgeSummary::to_json() const {
    json dims = json::object();
    for (const auto& [d, o] : outcomes) {
        dims[d] = {{"win", o.win},
                   {"tie", o.tie},
                   {"loss", o.loss},
                   {"win_pct", o.win_pct()},
                   {"tie_pct", o.tie_pct()},
                   {"loss_pct", o.loss_pct()}};
        if (auto it = mean_scores.find(d); it != mean_scores.end()) {
            dims[d]["mean_score_a"] = it->second.first;
            dims[d]["mean_score_b"] = it->second.second;
        }
    }
    return {{"judged", judged}, {"skipped", skipped}, {"excluded", excluded}, {"dimensions", dims}};
}

std::string JudgeSummary::table(const std::string& label_a, const std::string& label_b) const {
    std::ostringstream out;
    out << label_a << " vs " << label_b << ": " << judged << " judged, " << skipped << " skipped, " << excluded
        << " excluded (a side missed the gold label)\n";
    out << std::left << std::setw(22) << "dimension" << std::right << std::setw(8) << "win%" << std::setw(8)
        << "tie%" << std::setw(8) << "loss%" << "\n";
    out << std::fixed << std::setprecision(1);
    std::vector<std::string> order(std::begin(schema::kJudgeDimensions), std::end(schema::kJudgeDimensions));
    order.push_back(kOverall);
    for (const auto& d : order) {
        auto it = outcomes.find(d);
        if (it == outcomes.end()) continue;
        out << std::left << std::setw(22) << d << std::right << std::setw(8) << it->second.win_pct() << std::setw(8)
            << it->second.tie_pct() << std::setw(8) << it->second.loss_pct() << "\n";
    }
    return out.str();
}

}  // namespace pmr::judge
