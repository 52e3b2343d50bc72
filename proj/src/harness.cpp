#include "pmr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::harness {

using nlohmann::json;

RunArtifact run_mode(const std::vector<QuestionSpec>& questions, llm::LlmGateway& llm,
                     pubmed::PubMedGateway& pubmed, const PipelineConfig& config, const RunOptions& options,
                     const metrics::BenchmarkAggregate* baseline) {
    std::vector<std::optional<SessionTrace>> slots(questions.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr fatal;

    auto worker = [&] {
        for (auto i = next++; i < questions.size(); i = next++) {
            const auto& spec = questions[i];
            CostLedger ledger;
            SessionContext ctx{llm, pubmed, ledger, config, spec.id};
            try {
                slots[i] = run_session(options.mode, ctx, spec, options.resolved_config);
            } catch (const ScriptMismatch&) {
                // A script that does not fit the run is a test bug, not a question failure.
                std::lock_guard lock(err_mu);
                if (!fatal) fatal = std::current_exception();
                return;
            } catch (const std::exception& e) {
                SessionTrace t;
                t.mode = options.mode;
                t.spec = spec;
                t.config = options.resolved_config;
                t.ledger = ledger;
                t.failure = SessionFailure{"internal", e.what()};
                slots[i] = std::move(t);
            }
        }
    };

    auto n = static_cast<std::size_t>(std::max(1, options.parallelism));
    n = std::min(n, std::max<std::size_t>(1, questions.size()));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < n; ++k) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    RunArtifact run;
    run.run_id = options.run_id;
    run.mode = options.mode;
    for (auto& s : slots) run.traces.push_back(std::move(*s));
    std::sort(run.traces.begin(), run.traces.end(),
              [](const SessionTrace& a, const SessionTrace& b) { return a.spec.id < b.spec.id; });
    for (const auto& t : run.traces) run.outcomes.push_back(metrics::QuestionOutcome::from_trace(t));
    run.aggregate = metrics::aggregate(run.run_id, std::string(to_string(run.mode)), run.outcomes, baseline);
    return run;
}

json response_record(const SessionTrace& t) {
    json j = {{"id", t.spec.id},
              {"mode", to_string(t.mode)},
              {"model", t.model},
              {"answer", t.response ? t.response->answer : ""},
              {"rationale", t.response ? t.response->rationale : ""},
              {"citations", json::array()},
              {"evidence_grounded", t.response && t.response->evidence_grounded},
              {"ledger", to_json(t.ledger.totals())},
              {"stop_reasons", t.stop_reasons()}};
    if (t.response) {
        std::vector<std::string> cited(t.response->cited_pmids.begin(), t.response->cited_pmids.end());
        std::sort(cited.begin(), cited.end(), text::pmid_less);
        j["citations"] = cited;
    }
    if (t.failure) j["failure"] = {{"kind", t.failure->kind}, {"message", t.failure->message}};
    return j;
}

void write_artifact(const RunArtifact& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "traces");
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p);
        if (!f) throw Error("cannot write " + p.string());
        return f;
    };
    auto responses = open(dir / "responses.jsonl");
    auto outcomes = open(dir / "outcomes.jsonl");
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
        const auto& t = run.traces[i];
        open(dir / "traces" / (t.spec.id + ".trace.json")) << to_json(t).dump(2) << "\n";
        responses << response_record(t).dump() << "\n";
        outcomes << run.outcomes[i].to_json().dump() << "\n";
    }
    open(dir / "aggregate.jsonl") << run.aggregate.to_json().dump() << "\n";
    open(dir / "aggregate.txt") << run.aggregate.table();
}

metrics::BenchmarkAggregate load_aggregate(const std::filesystem::path& path) {
    auto file = std::filesystem::is_directory(path) ? path / "aggregate.jsonl" : path;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read baseline aggregate " + file.string());
    std::string line;
    while (std::getline(in, line))
        if (!text::trim(line).empty()) {
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) throw FormatError(1, "aggregate is not JSON");
            return metrics::BenchmarkAggregate::from_json(j);
        }
    throw FormatError(0, "empty aggregate file " + file.string());
}

std::map<std::string, json> load_responses(const std::filesystem::path& run_dir) {
    auto file = std::filesystem::is_directory(run_dir) ? run_dir / "responses.jsonl" : run_dir;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read responses " + file.string());
    std::map<std::string, json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("id")) throw FormatError(lineno, "bad response record");
        out[j["id"].get<std::string>()] = j;
    }
    return out;
}

std::string judge_text(const json& response) {
    return "Answer: " + response.value("answer", "") + "\nRationale: " + response.value("rationale", "");
}

JudgeReport run_judge(const std::vector<QuestionSpec>& questions, const std::map<std::string, json>& run_a,
                      const std::map<std::string, json>& run_b, llm::LlmGateway& judge, const JudgeOptions& options) {
    if (!options.allow_same_model) {
        auto judge_model = judge.model_name();
        for (const auto* run : {&run_a, &run_b})
            for (const auto& [id, r] : *run)
                if (r.value("model", "") == judge_model)
                    throw ConfigError("judge model '" + judge_model +
                                      "' also produced the answers being judged; pass the override to allow it");
    }

    std::vector<const QuestionSpec*> ordered;
    for (const auto& q : questions) ordered.push_back(&q);
    std::sort(ordered.begin(), ordered.end(), [](auto* x, auto* y) { return x->id < y->id; });

    JudgeReport report;
    std::mt19937 rng(options.seed);
    std::size_t excluded = 0;
    for (const auto* q : ordered) {
        auto a = run_a.find(q->id);
        auto b = run_b.find(q->id);
        if (a == run_a.end() || b == run_b.end() || !q->gold_label) {
            ++excluded;
            continue;
        }
        auto ans_a = a->second.value("answer", ""), ans_b = b->second.value("answer", "");
        if (!text::iequals(ans_a, *q->gold_label) || !text::iequals(ans_b, *q->gold_label)) {
            ++excluded;
            continue;
        }
        bool swap = (rng() & 1u) != 0;
        report.pairs.push_back(judge::judge_pair(judge, report.ledger, q->id, q->question, judge_text(a->second),
                                                 judge_text(b->second), swap));
    }
    report.summary = judge::summarize(report.pairs, excluded);
    return report;
}

}  // namespace pmr::harness
