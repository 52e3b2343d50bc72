#include "pmr/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::metrics {

using nlohmann::json;

QuestionOutcome QuestionOutcome::from_trace(const SessionTrace& t) {
    QuestionOutcome o;
    o.id = t.spec.id;
    o.answered = t.response.has_value();
    if (t.response) {
        o.answer = t.response->answer;
        o.grounded = t.response->evidence_grounded;
    }
    if (t.spec.gold_label) o.correct = o.answered && text::iequals(o.answer, *t.spec.gold_label);
    if (t.retrieval) o.esd = t.retrieval->esd;
    o.cost = t.ledger.totals();
    o.predicted_mesh = t.predicted_mesh();
    o.gold_mesh = t.spec.gold_mesh;
    if (t.failure) o.failure = t.failure->kind;
    return o;
}

json QuestionOutcome::to_json() const {
    json j = {{"id", id},
              {"answered", answered},
              {"answer", answer},
              {"grounded", grounded},
              {"cost", pmr::to_json(cost)},
              {"predicted_mesh", predicted_mesh},
              {"failure", failure}};
    if (correct) j["correct"] = *correct;
    if (esd) j["esd"] = *esd;
    if (gold_mesh) j["gold_mesh"] = *gold_mesh;
    return j;
}

QuestionOutcome QuestionOutcome::from_json(const json& j) {
    QuestionOutcome o;
    o.id = j.at("id").get<std::string>();
    o.answered = j.at("answered").get<bool>();
    o.answer = j.value("answer", "");
    o.grounded = j.at("grounded").get<bool>();
    o.cost = totals_from_json(j.at("cost"));
    o.predicted_mesh = j.at("predicted_mesh").get<std::set<std::string>>();
    o.failure = j.value("failure", "");
    if (j.contains("correct")) o.correct = j["correct"].get<bool>();
    if (j.contains("esd")) o.esd = j["esd"].get<std::size_t>();
    if (j.contains("gold_mesh")) o.gold_mesh = j["gold_mesh"].get<std::set<std::string>>();
    return o;
}

PrecisionRecall precision_recall(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
    std::set<std::string> p, g;
    for (const auto& x : predicted) p.insert(text::lower(x));
    for (const auto& x : gold) g.insert(text::lower(x));
    if (p.empty() || g.empty()) return {0.0, 0.0, true};
    std::size_t hit = 0;
    for (const auto& x : p) hit += g.count(x);
    return {static_cast<double>(hit) / static_cast<double>(p.size()),
            static_cast<double>(hit) / static_cast<double>(g.size()), false};
}

const std::array<std::string, EsdHistogram::kBuckets>& EsdHistogram::labels() {
    static const std::array<std::string, kBuckets> l{"0", "1-5", "6-10", "11-15", "16-20", ">20"};
    return l;
}

std::size_t EsdHistogram::bucket_of(std::size_t esd) const {
    if (esd == 0) return 0;
    if (esd > 20) return 5;
    return (esd - 1) / 5 + 1;
}

void EsdHistogram::add(std::size_t esd) { ++counts_[bucket_of(esd)]; }

std::size_t EsdHistogram::total() const {
    std::size_t n = 0;
    for (auto c : counts_) n += c;
    return n;
}

std::map<std::string, double> ratios(const Means& run, const Means& baseline) {
    std::map<std::string, double> out;
    auto put = [&](const char* key, double a, double b) {
        if (b != 0.0) out[key] = a / b;
    };
    put("input_tokens", run.input_tokens, baseline.input_tokens);
    put("output_tokens", run.output_tokens, baseline.output_tokens);
    put("llm_calls", run.llm_calls, baseline.llm_calls);
    put("search_calls", run.search_calls, baseline.search_calls);
    return out;
}

BenchmarkAggregate aggregate(const std::string& run_id, const std::string& mode,
                             const std::vector<QuestionOutcome>& outcomes, const BenchmarkAggregate* baseline) {
    BenchmarkAggregate a;
    a.run_id = run_id;
    a.mode = mode;
    a.questions = outcomes.size();
    double p_sum = 0, r_sum = 0;
    for (const auto& o : outcomes) {
        a.answered += o.answered ? 1 : 0;
        a.failures += o.failure.empty() ? 0 : 1;
        a.totals += o.cost;
        if (o.esd) a.esd.add(*o.esd);
        if (o.correct) {
            ++a.labelled;
            a.correct += *o.correct ? 1 : 0;
        }
        a.grounded += o.grounded ? 1 : 0;
        if (o.gold_mesh) {
            auto pr = precision_recall(o.predicted_mesh, *o.gold_mesh);
            ++a.mesh_scored;
            a.mesh_guarded += pr.guarded ? 1 : 0;
            p_sum += pr.precision;
            r_sum += pr.recall;
        }
    }
    if (a.questions) {
        auto n = static_cast<double>(a.questions);
        a.means = {static_cast<double>(a.totals.input_tokens) / n, static_cast<double>(a.totals.output_tokens) / n,
                   static_cast<double>(a.totals.llm_calls) / n, static_cast<double>(a.totals.search_calls) / n};
        a.egr = static_cast<double>(a.grounded) / n;
    }
    if (a.labelled) a.accuracy = static_cast<double>(a.correct) / static_cast<double>(a.labelled);
    if (a.mesh_scored) {
        a.precision = p_sum / static_cast<double>(a.mesh_scored);
        a.recall = r_sum / static_cast<double>(a.mesh_scored);
    }
    if (baseline) {
        a.baseline_id = baseline->run_id;
        a.ratios = ratios(a.means, baseline->means);
    }
    return a;
}

json BenchmarkAggregate::to_json() const {
    json hist = json::object();
    for (std::size_t i = 0; i < EsdHistogram::kBuckets; ++i) hist[EsdHistogram::labels()[i]] = esd.count(i);
    json j = {{"run_id", run_id},
              {"mode", mode},
              {"questions", questions},
              {"answered", answered},
              {"failures", failures},
              {"totals", pmr::to_json(totals)},
              {"means",
               {{"input_tokens", means.input_tokens},
                {"output_tokens", means.output_tokens},
                {"llm_calls", means.llm_calls},
                {"search_calls", means.search_calls}}},
              {"esd_histogram", hist},
              {"labelled", labelled},
              {"correct", correct},
              {"accuracy", accuracy},
              {"grounded", grounded},
              {"egr", egr},
              {"mesh_scored", mesh_scored},
              {"mesh_guarded", mesh_guarded},
              {"precision", precision},
              {"recall", recall}};
    if (baseline_id) {
        j["baseline_id"] = *baseline_id;
        j["ratios"] = ratios;
    }
    return j;
}

BenchmarkAggregate BenchmarkAggregate::from_json(const json& j) {
    try {
        BenchmarkAggregate a;
        a.run_id = j.at("run_id").get<std::string>();
        a.mode = j.at("mode").get<std::string>();
        a.questions = j.at("questions").get<std::size_t>();
        a.answered = j.at("answered").get<std::size_t>();
        a.failures = j.at("failures").get<std::size_t>();
        a.totals = totals_from_json(j.at("totals"));
        const auto& m = j.at("means");
        a.means = {m.at("input_tokens").get<double>(), m.at("output_tokens").get<double>(),
                   m.at("llm_calls").get<double>(), m.at("search_calls").get<double>()};
        const auto& hist = j.at("esd_histogram");
        for (std::size_t i = 0; i < EsdHistogram::kBuckets; ++i) {
            auto n = hist.at(EsdHistogram::labels()[i]).get<std::size_t>();
            // Re-adding a representative value per bucket reproduces the counts.
            static const std::size_t rep[] = {0, 1, 6, 11, 16, 21};
            for (std::size_t k = 0; k < n; ++k) a.esd.add(rep[i]);
        }
        a.labelled = j.at("labelled").get<std::size_t>();
        a.correct = j.at("correct").get<std::size_t>();
        a.accuracy = j.at("accuracy").get<double>();
        a.grounded = j.at("grounded").get<std::size_t>();
        a.egr = j.at("egr").get<double>();
        a.mesh_scored = j.at("mesh_scored").get<std::size_t>();
        a.mesh_guarded = j.at("mesh_guarded").get<std::size_t>();
        a.precision = j.at("precision").get<double>();
        a.recall = j.at("recall").get<double>();
        if (j.contains("baseline_id")) {
            a.baseline_id = j["baseline_id"].get<std::string>();
            a.ratios = j.at("ratios").get<std::map<std::string, double>>();
        }
        return a;
    } catch (const json::exception& e) {
        throw FormatError(0, std::string("aggregate record: ") + e.what());
    }
}

std::string BenchmarkAggregate::table() const {
    std::ostringstream out;
    out << std::fixed;
    auto row = [&](const std::string& name, const std::string& value) {
        out << std::left << std::setw(22) << name << value << "\n";
    };
    auto num = [](double v, int prec) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(prec) << v;
        return s.str();
    };
    row("run", run_id + " (" + mode + ")");
    row("questions", std::to_string(questions) + " (" + std::to_string(answered) + " answered, " +
                         std::to_string(failures) + " failed)");
    auto with_ratio = [&](const char* key, double v) {
        auto s = num(v, 2);
        if (auto it = ratios.find(key); it != ratios.end()) s += "  (x" + num(it->second, 2) + ")";
        return s;
    };
    row("input tokens / q", with_ratio("input_tokens", means.input_tokens));
    row("output tokens / q", with_ratio("output_tokens", means.output_tokens));
    row("LLM calls / q", with_ratio("llm_calls", means.llm_calls));
    row("search calls / q", with_ratio("search_calls", means.search_calls));
    if (baseline_id) row("ratios relative to", *baseline_id);
    row("accuracy", labelled ? num(100.0 * accuracy, 2) + "% (" + std::to_string(correct) + "/" +
                                   std::to_string(labelled) + ")"
                             : std::string("n/a"));
    row("EGR", num(100.0 * egr, 2) + "% (" + std::to_string(grounded) + "/" + std::to_string(questions) + ")");
    if (mesh_scored)
        row("MeSH precision/recall", num(precision, 4) + " / " + num(recall, 4) + " over " +
                                         std::to_string(mesh_scored) + " (" + std::to_string(mesh_guarded) +
                                         " guarded)");
    if (esd.total()) {
        std::string h;
        for (std::size_t i = 0; i < EsdHistogram::kBuckets; ++i)
            h += (i ? "  " : "") + EsdHistogram::labels()[i] + ":" + std::to_string(esd.count(i));
        row("ESD histogram", h);
    }
    return out.str();
}

}  // namespace pmr::metrics
