#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "pmr/cli.hpp"
#include "pmr/config.hpp"
#include "pmr/error.hpp"

using namespace pmr;
namespace fs = std::filesystem;

namespace {

const fs::path kDemo = fs::path(PMR_SOURCE_DIR) / "data" / "demo";

struct Result {
    int code;
    std::string out;
    std::string err;
};

config::EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars](const std::string& k) -> std::optional<std::string> {
        auto it = vars.find(k);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

Result run(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
    std::ostringstream out, err;
    int code = cli::run(args, out, err, env_of(std::move(env)));
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "pmr_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string demo(const char* file) { return (kDemo / file).string(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kQuestion = "Do leukotriene receptor antagonists reduce asthma exacerbations in children?";

}  // namespace

TEST(CliUsage, MissingConfigFileIsUsageError) {
    auto r = run({"ask", "Q?", "--config", "/nonexistent/pmr.json"});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_NE(r.err.find("/nonexistent/pmr.json"), std::string::npos);
}

TEST(CliUsage, UnknownModeAndSubcommand) {
    EXPECT_EQ(run({"ask", "Q?", "--config", demo("config.json"), "--mode", "oracle"}).code, cli::kUsage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
    EXPECT_EQ(run({}).code, cli::kUsage);
    EXPECT_EQ(run({"bench", "--config", demo("config.json")}).code, cli::kUsage);  // --dataset, --out missing
}

TEST(CliUsage, LiveBackendWithoutKeyRefused) {
    auto r = run({"ask", "Q?", "--backend", "live"});
    EXPECT_EQ(r.code, cli::kUsage);
    EXPECT_NE(r.err.find("PMR_LLM_API_KEY"), std::string::npos);
}

TEST(CliAsk, MockRunIsDeterministicAndWritesTrace) {
    auto dir = scratch("ask");
    std::vector<std::string> args{"ask", kQuestion, "--config", demo("config.json"), "--id", "d1"};
    auto a = run(args);
    auto b = run(args);
    ASSERT_EQ(a.code, cli::kOk) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_NE(a.out.find("Answer: yes"), std::string::npos);
    EXPECT_NE(a.out.find("Citations: 90000101, 90000102, 90000103"), std::string::npos);

    auto trace = dir / "d1.trace.json";
    args.insert(args.end(), {"--trace", trace.string()});
    ASSERT_EQ(run(args).code, cli::kOk);
    ASSERT_TRUE(fs::exists(trace));
    auto r1 = run({"replay", trace.string()});
    auto r2 = run({"replay", trace.string()});
    ASSERT_EQ(r1.code, cli::kOk) << r1.err;
    EXPECT_EQ(r1.out, r2.out);
    EXPECT_NE(r1.out.find("Final query: Asthma[mesh] AND Leukotriene Antagonists[mesh] AND Child[mesh]"),
              std::string::npos);
}

TEST(CliAsk, JsonRecord) {
    auto r = run({"ask", kQuestion, "--config", demo("config.json"), "--id", "d1", "--json"});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["answer"], "yes");
    EXPECT_EQ(j["ledger"]["search_calls"], 2);
}

TEST(CliAsk, PlanningFailureExitCode) {
    auto dir = scratch("planning");
    auto script = dir / "script.jsonl";
    std::ofstream(script) << R"({"schema_id": "mesh_candidates", "reply": {"terms": [{"term": "Asthma", "rationale": "r"}]}})" << "\n"
                          << R"({"schema_id": "query", "reply": {"query": "Asthma[mesh] AND"}})" << "\n"
                          << R"({"schema_id": "query", "reply": {"query": "OR"}})" << "\n";
    auto r = run({"ask", "Q?", "--config", demo("config.json"), "--script", script.string()});
    EXPECT_EQ(r.code, cli::kPlanning) << r.out << r.err;
}

TEST(CliReplay, TruncatedTraceExitCode) {
    auto dir = scratch("replay");
    auto trace = dir / "t.json";
    ASSERT_EQ(run({"ask", kQuestion, "--config", demo("config.json"), "--id", "d1", "--trace", trace.string()}).code,
              cli::kOk);
    auto text = slurp(trace);
    std::ofstream(trace) << text.substr(0, text.size() / 3);
    EXPECT_EQ(run({"replay", trace.string()}).code, cli::kTraceFormat);
    EXPECT_EQ(run({"replay", (dir / "missing.json").string()}).code, cli::kTraceFormat);
}

TEST(CliBench, AggregateAndBaselineColumns) {
    auto dir = scratch("bench");
    auto base = run({"bench", "--config", demo("config.json"), "--mode", "llm_only", "--script",
                     demo("script_llm_only.jsonl"), "--dataset", demo("demo.jsonl"), "--out", (dir / "llm").string()});
    ASSERT_EQ(base.code, cli::kOk) << base.err;
    auto agg = nlohmann::json::parse(slurp(dir / "llm" / "aggregate.jsonl"));
    EXPECT_EQ(agg["questions"], 3);
    EXPECT_NEAR(agg["accuracy"].get<double>(), 2.0 / 3.0, 1e-9);

    auto r = run({"bench", "--config", demo("config.json"), "--dataset", demo("demo.jsonl"), "--out",
                  (dir / "reasoner").string(), "--baseline", (dir / "llm").string()});
    ASSERT_EQ(r.code, cli::kOk) << r.err;
    EXPECT_NE(r.out.find("(x"), std::string::npos);
    EXPECT_NE(r.out.find("ratios relative to    llm_only"), std::string::npos);
    auto ragg = nlohmann::json::parse(slurp(dir / "reasoner" / "aggregate.jsonl"));
    EXPECT_DOUBLE_EQ(ragg["accuracy"].get<double>(), 1.0);
    EXPECT_TRUE(ragg.contains("ratios"));
    std::size_t traces = 0;
    for (const auto& e : fs::directory_iterator(dir / "reasoner" / "traces")) traces += e.is_regular_file();
    EXPECT_EQ(traces, 3u);

    auto j = run({"judge", "--config", demo("config.json"), "--dataset", demo("demo.jsonl"), "--run-a",
                  (dir / "reasoner").string(), "--run-b", (dir / "llm").string(), "--judge-script",
                  demo("script_judge.jsonl"), "--out", (dir / "judge.json").string()});
    ASSERT_EQ(j.code, cli::kOk) << j.err;
    auto summary = nlohmann::json::parse(slurp(dir / "judge.json"));
    EXPECT_EQ(summary["judged"], 2);
    EXPECT_EQ(summary["excluded"], 1);

    auto same = run({"judge", "--config", demo("config.json"), "--dataset", demo("demo.jsonl"), "--run-a",
                     (dir / "reasoner").string(), "--run-b", (dir / "llm").string(), "--judge-model",
                     "scripted-demo"});
    EXPECT_EQ(same.code, cli::kUsage);
}

// Configuration precedence: flags > environment > file > defaults.

TEST(Config, Precedence) {
    auto dir = scratch("config");
    auto file = dir / "c.json";
    std::ofstream(file) << R"({"llm": {"model": "file-model", "script": "s.jsonl"},
                               "pipeline": {"batch_size": 4, "refinement_budget": 5}, "parallelism": 2})";
    config::Overrides none;
    auto defaults = config::resolve(std::nullopt, none, env_of({}));
    EXPECT_EQ(defaults.llm_model, "");
    EXPECT_EQ(defaults.pipeline.batch_size, 5u);

    auto from_file = config::resolve(file, none, env_of({}));
    EXPECT_EQ(from_file.llm_model, "file-model");
    EXPECT_EQ(from_file.script, dir / "s.jsonl");  // relative to the config file
    EXPECT_EQ(from_file.pipeline.batch_size, 4u);
    EXPECT_EQ(from_file.parallelism, 2);

    auto from_env = config::resolve(file, none, env_of({{"PMR_LLM_MODEL", "env-model"}, {"PMR_PARALLELISM", "3"}}));
    EXPECT_EQ(from_env.llm_model, "env-model");
    EXPECT_EQ(from_env.parallelism, 3);

    config::Overrides flags;
    flags.model = "flag-model";
    flags.batch_size = 2;
    flags.mesh_budget = 1;
    auto from_flags = config::resolve(file, flags, env_of({{"PMR_LLM_MODEL", "env-model"}}));
    EXPECT_EQ(from_flags.llm_model, "flag-model");
    EXPECT_EQ(from_flags.pipeline.batch_size, 2u);
    EXPECT_EQ(from_flags.pipeline.refinement_budget, 1);
}

TEST(Config, SecretsNeverSerialized) {
    auto c = config::resolve(std::nullopt, {},
                             env_of({{"PMR_LLM_API_KEY", "sk-test-secret"},
                                     {"NCBI_API_KEY", "ncbi-secret"},
                                     {"NCBI_EMAIL", "someone@example.org"}}));
    EXPECT_EQ(c.llm_api_key, "sk-test-secret");
    auto dumped = c.to_json().dump();
    EXPECT_EQ(dumped.find("sk-test-secret"), std::string::npos);
    EXPECT_EQ(dumped.find("ncbi-secret"), std::string::npos);
    EXPECT_EQ(dumped.find("someone@example.org"), std::string::npos);
    EXPECT_NE(dumped.find("\"api_key_set\":true"), std::string::npos);

    auto fallback = config::resolve(std::nullopt, {}, env_of({{"OPENAI_API_KEY", "sk-fallback"}}));
    EXPECT_EQ(fallback.llm_api_key, "sk-fallback");
}

TEST(Config, InvalidValuesRejected) {
    auto dir = scratch("config_bad");
    auto file = dir / "bad.json";
    std::ofstream(file) << R"({"pipeline": {"batch_size": 0}})";
    EXPECT_THROW(config::resolve(file, {}, env_of({})), ConfigError);
    std::ofstream(file) << "{not json";
    EXPECT_THROW(config::resolve(file, {}, env_of({})), ConfigError);
    config::Overrides flags;
    flags.backend = "carrier-pigeon";
    EXPECT_THROW(config::resolve(std::nullopt, flags, env_of({})), ConfigError);
}
