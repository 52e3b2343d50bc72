#pragma once

// Run configuration: defaults < config file < environment < flags.
//
// Config file (JSON):
//   {"backend": "mock" | "live",
//    "llm":    {"backend": ..., "model": ..., "base_url": ..., "path": ..., "script": ..., "timeout_s": 120},
//    "pubmed": {"backend": ..., "corpus": ..., "base_url": ..., "email": ..., "tool": ...,
//               "rate_per_second": 3, "timeout_s": 10},
//    "judge":  {"backend": ..., "model": ..., "script": ..., "base_url": ..., "allow_same_model": false},
//    "pipeline": {"batch_size": 5, "max_articles": 20, "token_budget": null, "refinement_budget": 3,
//                 "max_broadenings": 2, "diminishing_streak": 2, "self_reflection_rounds": 3,
//                 "temperatures": {"critique": 0.0, ...}},
//    "retry": {"max_attempts": 3, "initial_backoff_ms": 500},
//    "parallelism": 1}
//
// Credentials only come from the environment: PMR_LLM_API_KEY (or
// OPENAI_API_KEY), NCBI_API_KEY, NCBI_EMAIL.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "pmr/llm.hpp"
#include "pmr/pubmed.hpp"
#include "pmr/retry.hpp"
#include "pmr/session.hpp"

namespace pmr::config {

struct RunConfig {
    std::string llm_backend = "mock";  // mock | live
    std::string llm_model;             // empty: backend default
    std::string llm_base_url = "https://api.openai.com";
    std::string llm_path = "/v1/chat/completions";
    std::string llm_api_key;
    std::filesystem::path script;
    int llm_timeout_s = 120;

    std::string pubmed_backend = "mock";  // mock (fixture corpus) | live
    std::filesystem::path corpus;
    std::string eutils_base_url = "https://eutils.ncbi.nlm.nih.gov";
    std::string ncbi_api_key;
    std::string ncbi_email;
    std::string ncbi_tool = "pmreasoner";
    double rate_per_second = 3.0;
    int pubmed_timeout_s = 10;

    std::string judge_backend = "mock";
    std::string judge_model;
    std::filesystem::path judge_script;
    std::string judge_base_url = "https://api.openai.com";
    bool allow_same_judge_model = false;

    PipelineConfig pipeline;
    RetryPolicy retry;
    int parallelism = 1;

    /// Resolved values without credentials (only whether each is set).
    nlohmann::json to_json() const;
    bool mock_only() const { return llm_backend == "mock" && pubmed_backend == "mock"; }
};

/// Flag values; unset members leave lower-precedence values alone.
struct Overrides {
    std::optional<std::string> backend;
    std::optional<std::string> model;
    std::optional<std::filesystem::path> script;
    std::optional<std::filesystem::path> corpus;
    std::optional<std::string> judge_model;
    std::optional<std::filesystem::path> judge_script;
    std::optional<bool> allow_same_judge_model;
    std::optional<int> mesh_budget;
    std::optional<std::size_t> batch_size;
    std::optional<std::size_t> max_articles;
    std::optional<std::uint64_t> token_budget;
    std::optional<int> parallelism;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// Throws ConfigError for unreadable files, unknown backends, or invalid values.
RunConfig resolve(const std::optional<std::filesystem::path>& file, const Overrides& flags, const EnvLookup& env);

/// Stage temperatures keyed by stage name.
Temperatures parse_temperatures(const nlohmann::json& j);

/// Throws ConfigError when the selected backend lacks what it needs.
std::shared_ptr<llm::ChatBackend> make_chat_backend(const RunConfig& c);
std::shared_ptr<llm::ChatBackend> make_judge_backend(const RunConfig& c);
std::shared_ptr<pubmed::SearchBackend> make_search_backend(const RunConfig& c);

}  // namespace pmr::config
