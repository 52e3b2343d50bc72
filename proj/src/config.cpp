#include "pmr/config.hpp"

#include <cstdlib>
#include <fstream>

#include "pmr/error.hpp"

namespace pmr::config {

using nlohmann::json;

namespace {

std::string checked_backend(const std::string& value, const std::string& what) {
    if (value == "mock" || value == "live") return value;
    throw ConfigError("unknown " + what + " backend '" + value + "' (expected mock or live)");
}

template <typename T>
void take(const json& obj, const char* key, T& dst) {
    if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return;
    try {
        dst = obj[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

void take_path(const json& obj, const char* key, std::filesystem::path& dst, const std::filesystem::path& base) {
    std::string s;
    take(obj, key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    dst = p.is_relative() ? base / p : p;
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(what + " must be an integer, got '" + s + "'");
    }
}

void apply_file(RunConfig& c, const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config file is not a JSON object: " + file.string());
    auto base = file.parent_path();

    std::string both;
    take(j, "backend", both);
    if (!both.empty()) c.llm_backend = c.pubmed_backend = c.judge_backend = both;

    if (j.contains("llm")) {
        const auto& l = j["llm"];
        take(l, "backend", c.llm_backend);
        take(l, "model", c.llm_model);
        take(l, "base_url", c.llm_base_url);
        take(l, "path", c.llm_path);
        take(l, "timeout_s", c.llm_timeout_s);
        take_path(l, "script", c.script, base);
    }
    if (j.contains("pubmed")) {
        const auto& p = j["pubmed"];
        take(p, "backend", c.pubmed_backend);
        take(p, "base_url", c.eutils_base_url);
        take(p, "email", c.ncbi_email);
        take(p, "tool", c.ncbi_tool);
        take(p, "rate_per_second", c.rate_per_second);
        take(p, "timeout_s", c.pubmed_timeout_s);
        take_path(p, "corpus", c.corpus, base);
    }
    if (j.contains("judge")) {
        const auto& g = j["judge"];
        take(g, "backend", c.judge_backend);
        take(g, "model", c.judge_model);
        take(g, "base_url", c.judge_base_url);
        take(g, "allow_same_model", c.allow_same_judge_model);
        take_path(g, "script", c.judge_script, base);
    }
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        auto& pc = c.pipeline;
        take(p, "batch_size", pc.batch_size);
        take(p, "max_articles", pc.max_articles);
        take(p, "refinement_budget", pc.refinement_budget);
        take(p, "max_broadenings", pc.max_broadenings);
        take(p, "diminishing_streak", pc.diminishing_streak);
        take(p, "self_reflection_rounds", pc.self_reflection_rounds);
        if (p.contains("token_budget") && !p["token_budget"].is_null()) {
            std::uint64_t b = 0;
            take(p, "token_budget", b);
            pc.token_budget = b;
        }
        if (p.contains("temperatures")) pc.temperatures = parse_temperatures(p["temperatures"]);
    }
    if (j.contains("retry")) {
        int ms = static_cast<int>(c.retry.initial_backoff.count());
        take(j["retry"], "max_attempts", c.retry.max_attempts);
        take(j["retry"], "initial_backoff_ms", ms);
        c.retry.initial_backoff = std::chrono::milliseconds(ms);
    }
    take(j, "parallelism", c.parallelism);
}

void apply_env(RunConfig& c, const EnvLookup& env) {
    if (auto v = env("PMR_BACKEND")) c.llm_backend = c.pubmed_backend = c.judge_backend = *v;
    if (auto v = env("PMR_LLM_MODEL")) c.llm_model = *v;
    if (auto v = env("PMR_LLM_BASE_URL")) c.llm_base_url = *v;
    if (auto v = env("PMR_SCRIPT")) c.script = *v;
    if (auto v = env("PMR_CORPUS")) c.corpus = *v;
    if (auto v = env("PMR_JUDGE_MODEL")) c.judge_model = *v;
    if (auto v = env("PMR_PARALLELISM")) c.parallelism = parse_int(*v, "PMR_PARALLELISM");

    if (auto v = env("PMR_LLM_API_KEY"))
        c.llm_api_key = *v;
    else if (auto w = env("OPENAI_API_KEY"))
        c.llm_api_key = *w;
    if (auto v = env("NCBI_API_KEY")) c.ncbi_api_key = *v;
    if (auto v = env("NCBI_EMAIL")) c.ncbi_email = *v;
}

void apply_flags(RunConfig& c, const Overrides& f) {
    if (f.backend) c.llm_backend = c.pubmed_backend = c.judge_backend = *f.backend;
    if (f.model) c.llm_model = *f.model;
    if (f.script) c.script = *f.script;
    if (f.corpus) c.corpus = *f.corpus;
    if (f.judge_model) c.judge_model = *f.judge_model;
    if (f.judge_script) c.judge_script = *f.judge_script;
    if (f.allow_same_judge_model) c.allow_same_judge_model = *f.allow_same_judge_model;
    if (f.mesh_budget) c.pipeline.refinement_budget = *f.mesh_budget;
    if (f.batch_size) c.pipeline.batch_size = *f.batch_size;
    if (f.max_articles) c.pipeline.max_articles = *f.max_articles;
    if (f.token_budget) c.pipeline.token_budget = *f.token_budget;
    if (f.parallelism) c.parallelism = *f.parallelism;
}

void validate(RunConfig& c) {
    checked_backend(c.llm_backend, "llm");
    checked_backend(c.pubmed_backend, "pubmed");
    checked_backend(c.judge_backend, "judge");
    const auto& p = c.pipeline;
    if (p.batch_size == 0) throw ConfigError("batch size must be at least 1");
    if (p.max_articles == 0) throw ConfigError("max articles must be at least 1");
    if (p.refinement_budget < 1) throw ConfigError("refinement budget must be at least 1");
    if (p.max_broadenings < 0 || p.diminishing_streak < 1 || p.self_reflection_rounds < 0)
        throw ConfigError("invalid broadening, streak or reflection setting");
    if (c.parallelism < 1) throw ConfigError("parallelism must be at least 1");
    if (c.rate_per_second <= 0) throw ConfigError("rate_per_second must be positive");
    if (c.retry.max_attempts < 1) throw ConfigError("retry max_attempts must be at least 1");
}

}  // namespace

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
}

Temperatures parse_temperatures(const json& j) {
    if (!j.is_object()) throw ConfigError("temperatures must be an object keyed by stage");
    Temperatures t;
    for (const auto& [name, value] : j.items()) {
        auto stage = stage_from_string(name);
        if (!stage) throw ConfigError("unknown stage '" + name + "' in temperatures");
        if (!value.is_number()) throw ConfigError("temperature for '" + name + "' must be a number");
        t.by_stage[*stage] = value.get<double>();
    }
    return t;
}

RunConfig resolve(const std::optional<std::filesystem::path>& file, const Overrides& flags, const EnvLookup& env) {
    RunConfig c;
    if (file) apply_file(c, *file);
    apply_env(c, env);
    apply_flags(c, flags);
    validate(c);
    // NCBI allows 10 requests/s with a key; an explicit rate in the file wins.
    if (!c.ncbi_api_key.empty() && c.rate_per_second == 3.0) c.rate_per_second = 10.0;
    return c;
}

json RunConfig::to_json() const {
    json temps = json::object();
    for (const auto& [s, v] : pipeline.temperatures.by_stage) temps[std::string(to_string(s))] = v;
    return {
        {"llm",
         {{"backend", llm_backend},
          {"model", llm_model},
          {"base_url", llm_backend == "live" ? llm_base_url : ""},
          {"api_key_set", !llm_api_key.empty()},
          {"script", script.string()}}},
        {"pubmed",
         {{"backend", pubmed_backend},
          {"corpus", corpus.string()},
          {"base_url", pubmed_backend == "live" ? eutils_base_url : ""},
          {"api_key_set", !ncbi_api_key.empty()},
          {"email_set", !ncbi_email.empty()},
          {"rate_per_second", rate_per_second}}},
        {"pipeline",
         {{"batch_size", pipeline.batch_size},
          {"max_articles", pipeline.max_articles},
          {"token_budget", pipeline.token_budget ? json(*pipeline.token_budget) : json(nullptr)},
          {"refinement_budget", pipeline.refinement_budget},
          {"max_broadenings", pipeline.max_broadenings},
          {"diminishing_streak", pipeline.diminishing_streak},
          {"self_reflection_rounds", pipeline.self_reflection_rounds},
          {"temperatures", temps}}},
        {"retry", {{"max_attempts", retry.max_attempts}, {"initial_backoff_ms", retry.initial_backoff.count()}}},
        {"parallelism", parallelism},
    };
}

std::shared_ptr<llm::ChatBackend> make_chat_backend(const RunConfig& c) {
    if (c.llm_backend == "mock") {
        if (c.script.empty()) throw ConfigError("mock LLM backend needs a script (--script or PMR_SCRIPT)");
        return llm::ScriptedBackend::load(c.script, c.llm_model.empty() ? "scripted-mock" : c.llm_model);
    }
    if (c.llm_api_key.empty()) throw ConfigError("live LLM backend needs PMR_LLM_API_KEY or OPENAI_API_KEY");
    llm::OpenAIConfig oc;
    oc.base_url = c.llm_base_url;
    oc.path = c.llm_path;
    if (!c.llm_model.empty()) oc.model = c.llm_model;
    oc.api_key = c.llm_api_key;
    oc.timeout = std::chrono::seconds(c.llm_timeout_s);
    return std::make_shared<llm::OpenAIBackend>(oc);
}

std::shared_ptr<llm::ChatBackend> make_judge_backend(const RunConfig& c) {
    if (c.judge_backend == "mock") {
        if (c.judge_script.empty()) throw ConfigError("mock judge backend needs a script (--judge-script)");
        return llm::ScriptedBackend::load(c.judge_script, c.judge_model.empty() ? "scripted-judge" : c.judge_model);
    }
    if (c.judge_model.empty()) throw ConfigError("live judge backend needs a judge model (--judge-model)");
    if (c.llm_api_key.empty()) throw ConfigError("live judge backend needs PMR_LLM_API_KEY or OPENAI_API_KEY");
    llm::OpenAIConfig oc;
    oc.base_url = c.judge_base_url;
    oc.path = c.llm_path;
    oc.model = c.judge_model;
    oc.api_key = c.llm_api_key;
    oc.timeout = std::chrono::seconds(c.llm_timeout_s);
    return std::make_shared<llm::OpenAIBackend>(oc);
}

std::shared_ptr<pubmed::SearchBackend> make_search_backend(const RunConfig& c) {
    if (c.pubmed_backend == "mock") {
        if (c.corpus.empty()) throw ConfigError("mock PubMed backend needs a fixture corpus (--corpus or PMR_CORPUS)");
        return std::make_shared<pubmed::FixtureCorpus>(pubmed::FixtureCorpus::load(c.corpus));
    }
    pubmed::EutilsConfig ec;
    ec.base_url = c.eutils_base_url;
    ec.api_key = c.ncbi_api_key;
    ec.email = c.ncbi_email;
    ec.tool = c.ncbi_tool;
    ec.timeout = std::chrono::seconds(c.pubmed_timeout_s);
    return std::make_shared<pubmed::EutilsBackend>(ec, std::make_shared<RateLimiter>(c.rate_per_second));
}

}  // namespace pmr::config
