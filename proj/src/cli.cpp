#include "pmr/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

#include "pmr/dataset.hpp"
#include "pmr/error.hpp"
#include "pmr/harness.hpp"
#include "pmr/pipeline.hpp"
#include "pmr/text.hpp"

namespace pmr::cli {

using nlohmann::json;

namespace {

struct Common {
    std::string config_file;
    config::Overrides flags;
    std::string mode = "reasoner";
};

// Optional values need a staging variable because CLI11 binds to plain types.
struct Staged {
    std::string backend, model, script, corpus;
    int mesh_budget = 0, parallelism = 0;
    std::size_t batch_size = 0, max_articles = 0;
    std::uint64_t token_budget = 0;
};

void add_common(CLI::App* sub, Common& c, Staged& s, bool with_mode) {
    sub->add_option("--config", c.config_file, "JSON config file");
    sub->add_option("--backend", s.backend, "mock or live, for both gateways");
    sub->add_option("--model", s.model, "Answering model name");
    sub->add_option("--script", s.script, "Scripted LLM turns (mock backend)");
    sub->add_option("--corpus", s.corpus, "Fixture corpus .jsonl file or directory (mock backend)");
    sub->add_option("--mesh-budget", s.mesh_budget, "Refinement iteration budget");
    sub->add_option("--batch-size", s.batch_size, "Articles per retrieval batch");
    sub->add_option("--max-articles", s.max_articles, "Articles screened by the coarse filter");
    sub->add_option("--token-budget", s.token_budget, "Retrieval-stage token budget");
    sub->add_option("--parallelism", s.parallelism, "Concurrent questions");
    if (with_mode) sub->add_option("--mode", c.mode, "reasoner, llm_only, one_shot_rag or self_reflection");
}

void commit(const CLI::App* sub, Common& c, const Staged& s) {
    auto& f = c.flags;
    if (sub->count("--backend")) f.backend = s.backend;
    if (sub->count("--model")) f.model = s.model;
    if (sub->count("--script")) f.script = s.script;
    if (sub->count("--corpus")) f.corpus = s.corpus;
    if (sub->count("--mesh-budget")) f.mesh_budget = s.mesh_budget;
    if (sub->count("--batch-size")) f.batch_size = s.batch_size;
    if (sub->count("--max-articles")) f.max_articles = s.max_articles;
    if (sub->count("--token-budget")) f.token_budget = s.token_budget;
    if (sub->count("--parallelism")) f.parallelism = s.parallelism;
}

config::RunConfig resolve(const Common& c, const config::EnvLookup& env) {
    std::optional<std::filesystem::path> file;
    if (!c.config_file.empty()) file = c.config_file;
    return config::resolve(file, c.flags, env);
}

Mode parse_mode(const std::string& s) {
    auto m = mode_from_string(s);
    if (!m) throw ConfigError("unknown mode '" + s + "'");
    return *m;
}

dataset::Format parse_format(const std::string& s) {
    auto f = dataset::format_from_string(s);
    if (!f) throw ConfigError("unknown dataset format '" + s + "' (expected pubmedqa or mcq)");
    return *f;
}

void write_file(const std::filesystem::path& p, const std::string& body) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw Error("cannot write " + p.string());
    f << body;
}

void print_response(std::ostream& out, const SessionTrace& t) {
    if (t.response) {
        out << "Answer: " << t.response->answer << "\n";
        out << "Rationale: " << t.response->rationale << "\n";
        std::vector<std::string> cited(t.response->cited_pmids.begin(), t.response->cited_pmids.end());
        std::sort(cited.begin(), cited.end(), text::pmid_less);
        out << "Citations: " << (cited.empty() ? "none" : text::join(cited, ", ")) << "\n";
        out << "Evidence-grounded: " << (t.response->evidence_grounded ? "yes" : "no") << "\n";
    }
    out << "Stop reasons: " << text::join(t.stop_reasons(), ", ") << "\n";
    auto tot = t.ledger.totals();
    out << "Cost: " << tot.input_tokens << " input tokens, " << tot.output_tokens << " output tokens, "
        << tot.llm_calls << " LLM calls, " << tot.search_calls << " searches\n";
}

}  // namespace

int exit_code_for_failure(const std::string& kind) {
    if (kind == "planning_failure" || kind == "empty_plan") return kPlanning;
    if (kind == "network") return kNetwork;
    if (kind == "answer_format") return kAnswerFormat;
    return kOther;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const config::EnvLookup& env) {
    CLI::App app{"Evidence-grounded biomedical question answering over PubMed", "pmreasoner"};
    app.require_subcommand(1);

    Common ask_c, bench_c, judge_c;
    Staged ask_s, bench_s, judge_s;

    auto* ask = app.add_subcommand("ask", "Answer one question and print the response");
    std::string question, context, year_window, labels = "yes,no,maybe", trace_path, qid = "ask";
    bool free_text = false, as_json = false;
    ask->add_option("question", question, "Natural-language question")->required();
    ask->add_option("--context", context, "Optional context passage");
    ask->add_option("--year-window", year_window, "Publication window, e.g. 1990:2000");
    ask->add_option("--labels", labels, "Comma-separated answer labels");
    ask->add_flag("--free-text", free_text, "Accept any nonempty answer");
    ask->add_option("--id", qid, "Question id (also the scripted session id)");
    ask->add_option("--trace", trace_path, "Write the session trace here");
    ask->add_flag("--json", as_json, "Print the response record as JSON");
    add_common(ask, ask_c, ask_s, true);

    auto* bench = app.add_subcommand("bench", "Run a mode over a dataset and write a run artifact");
    std::string dataset_path, format = "pubmedqa", out_dir, run_id, baseline;
    bench->add_option("--dataset", dataset_path, "Dataset .jsonl")->required();
    bench->add_option("--format", format, "pubmedqa or mcq");
    bench->add_option("--out", out_dir, "Run directory")->required();
    bench->add_option("--run-id", run_id, "Run id (default: the mode name)");
    bench->add_option("--baseline", baseline, "Baseline aggregate (run directory or aggregate.jsonl)");
    add_common(bench, bench_c, bench_s, true);

    auto* judge = app.add_subcommand("judge", "Pairwise judging of two finished runs");
    std::string run_a, run_b, jdataset, jformat = "pubmedqa", judge_model, judge_script, judge_out;
    unsigned seed = harness::JudgeOptions{}.seed;
    bool allow_same = false;
    judge->add_option("--dataset", jdataset, "Dataset with gold labels")->required();
    judge->add_option("--format", jformat, "pubmedqa or mcq");
    judge->add_option("--run-a", run_a, "First run directory")->required();
    judge->add_option("--run-b", run_b, "Second run directory")->required();
    judge->add_option("--judge-model", judge_model, "Judge model name");
    judge->add_option("--judge-script", judge_script, "Scripted judge turns (mock backend)");
    judge->add_flag("--allow-same-judge", allow_same, "Allow the judge to share a model with a run");
    judge->add_option("--seed", seed, "Seed for presentation order");
    judge->add_option("--out", judge_out, "Write the judge summary JSON here");
    add_common(judge, judge_c, judge_s, false);

    auto* replay = app.add_subcommand("replay", "Render a saved trace without network access");
    std::string replay_path;
    replay->add_option("trace", replay_path, "Trace file")->required();

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (app.get_subcommands().empty()) err << app.help();
        return kUsage;
    }

    const auto live_before = net::live_request_count();
    bool mock_only = true;
    auto check_network = [&](int code) -> int {
        if (mock_only && net::live_request_count() != live_before) {
            err << "error: network request issued while every backend was mocked\n";
            return kOther;
        }
        return code;
    };

    try {
        if (replay->parsed()) {
            out << render_report(load_trace(replay_path));
            return kOk;
        }

        if (ask->parsed()) {
            commit(ask, ask_c, ask_s);
            auto mode = parse_mode(ask_c.mode);
            auto cfg = resolve(ask_c, env);
            mock_only = cfg.mock_only();
            llm::LlmGateway llm(config::make_chat_backend(cfg), cfg.retry);
            pubmed::PubMedGateway pm(config::make_search_backend(cfg), cfg.retry);

            QuestionSpec spec;
            spec.id = qid;
            spec.question = question;
            if (!context.empty()) spec.context = context;
            if (!year_window.empty()) spec.date_window = dataset::parse_year_window(json(year_window));
            if (free_text) {
                spec.task_spec = "Answer the question concisely.";
            } else {
                std::istringstream parts(labels);
                for (std::string l; std::getline(parts, l, ',');)
                    if (auto t = std::string(text::trim(l)); !t.empty()) spec.labels.push_back(t);
                if (spec.labels.empty()) throw ConfigError("--labels is empty");
                spec.task_spec = spec.labels == std::vector<std::string>{"yes", "no", "maybe"}
                                     ? kYesNoMaybeInstruction
                                     : "Answer the question with exactly one of: " + text::join(spec.labels, ", ") + ".";
            }

            CostLedger ledger;
            SessionContext ctx{llm, pm, ledger, cfg.pipeline, spec.id};
            auto trace = run_session(mode, ctx, spec, cfg.to_json());
            if (!trace_path.empty()) write_file(trace_path, to_json(trace).dump(2) + "\n");

            if (as_json)
                out << harness::response_record(trace).dump(2) << "\n";
            else
                print_response(out, trace);
            if (!trace_path.empty()) out << "Trace: " << trace_path << "\n";
            if (trace.failure) {
                err << "error: " << trace.failure->kind << ": " << trace.failure->message << "\n";
                return check_network(exit_code_for_failure(trace.failure->kind));
            }
            return check_network(kOk);
        }

        if (bench->parsed()) {
            commit(bench, bench_c, bench_s);
            auto mode = parse_mode(bench_c.mode);
            auto fmt = parse_format(format);
            auto cfg = resolve(bench_c, env);
            mock_only = cfg.mock_only();
            auto questions = dataset::load_dataset(dataset_path, fmt);
            std::optional<metrics::BenchmarkAggregate> base;
            if (!baseline.empty()) base = harness::load_aggregate(baseline);

            llm::LlmGateway llm(config::make_chat_backend(cfg), cfg.retry);
            pubmed::PubMedGateway pm(config::make_search_backend(cfg), cfg.retry);
            harness::RunOptions opts;
            opts.mode = mode;
            opts.run_id = run_id.empty() ? std::string(to_string(mode)) : run_id;
            opts.parallelism = cfg.parallelism;
            opts.resolved_config = cfg.to_json();
            auto run = harness::run_mode(questions, llm, pm, cfg.pipeline, opts, base ? &*base : nullptr);
            harness::write_artifact(run, out_dir);
            out << run.aggregate.table();
            out << "Run directory: " << out_dir << "\n";
            return check_network(kOk);
        }

        if (judge->parsed()) {
            commit(judge, judge_c, judge_s);
            if (judge->count("--judge-model")) judge_c.flags.judge_model = judge_model;
            if (judge->count("--judge-script")) judge_c.flags.judge_script = judge_script;
            if (allow_same) judge_c.flags.allow_same_judge_model = true;
            auto cfg = resolve(judge_c, env);
            mock_only = cfg.judge_backend == "mock";
            auto questions = dataset::load_dataset(jdataset, parse_format(jformat));
            auto ra = harness::load_responses(run_a);
            auto rb = harness::load_responses(run_b);

            // One corrective re-ask for judge replies, then the pair is skipped.
            llm::LlmGateway gw(config::make_judge_backend(cfg), cfg.retry, 1);
            harness::JudgeOptions opts;
            opts.seed = seed;
            opts.allow_same_model = cfg.allow_same_judge_model;
            opts.label_a = std::filesystem::path(run_a).filename().string();
            opts.label_b = std::filesystem::path(run_b).filename().string();
            auto report = harness::run_judge(questions, ra, rb, gw, opts);
            out << report.summary.table(opts.label_a, opts.label_b);
            auto tot = report.ledger.totals();
            out << "Judge cost: " << tot.input_tokens << " input tokens, " << tot.output_tokens
                << " output tokens, " << tot.llm_calls << " calls\n";
            if (!judge_out.empty()) {
                json j = report.summary.to_json();
                j["seed"] = seed;
                j["judge_model"] = gw.model_name();
                j["ledger"] = to_json(report.ledger.totals());
                json pairs = json::array();
                for (const auto& p : report.pairs) {
                    json pj = {{"id", p.id}, {"swapped", p.swapped}};
                    if (p.verdict)
                        pj["verdict"] = p.verdict->to_json();
                    else
                        pj["skip_reason"] = p.skip_reason;
                    pairs.push_back(pj);
                }
                j["pairs"] = pairs;
                write_file(judge_out, j.dump(2) + "\n");
            }
            return check_network(kOk);
        }
    } catch (const TraceFormatError& e) {
        err << "error: " << e.what() << "\n";
        return kTraceFormat;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NetworkError& e) {
        err << "error: " << e.what() << "\n";
        return kNetwork;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOther;
    }
    return kUsage;
}

}  // namespace pmr::cli
