#pragma once

// Chat gateway: every model-backed operator in the pipeline goes through
// LlmGateway::complete, which handles transport retries, envelope
// extraction with corrective re-asks, and token accounting.

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/ledger.hpp"
#include "pmr/retry.hpp"

namespace pmr::llm {

enum class Role { System, User };

struct RoleBlock {
    Role role = Role::User;
    std::string text;
};

struct ChatRequest {
    std::vector<RoleBlock> blocks;
    double temperature = 0.0;
    std::string schema_id;
    std::optional<int> max_output_tokens;
    Stage stage = Stage::Answer;
    /// Routes scripted turns when several sessions share one backend.
    std::string session_id;

    /// All block texts joined, used for substring matching.
    std::string prompt_text() const;
};

struct ChatResponse {
    std::string raw_text;
    std::optional<nlohmann::json> parsed;
    std::uint64_t input_tokens = 0;
    std::uint64_t output_tokens = 0;
    bool estimated_tokens = false;
    int attempt = 0;
};

/// What a backend hands back for one request. Token counts are absent when
/// the backend does not report usage.
struct RawReply {
    std::string text;
    std::optional<std::uint64_t> input_tokens;
    std::optional<std::uint64_t> output_tokens;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual RawReply send(const ChatRequest& req) = 0;
    virtual std::string model_name() const = 0;
};

/// ceil(chars / 4)
std::uint64_t estimate_tokens(std::string_view text);

struct ScriptedTurn {
    std::string schema_id;
    std::optional<std::string> contains;  // substring the prompt must contain
    std::string reply;
    std::optional<std::uint64_t> input_tokens;
    std::optional<std::uint64_t> output_tokens;
    std::string session;  // empty: shared queue
};

/// Deterministic test double. Turns are consumed strictly in order, per
/// session (falling back to the shared queue). A request that does not match
/// the next turn, or arrives after the script ran out, throws ScriptMismatch.
///
/// File format: one JSON object per line,
///   {"schema_id": "...", "contains": "...", "reply": "..." | {...},
///    "input_tokens": 100, "output_tokens": 20, "session": "q1"}
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::vector<ScriptedTurn> turns, std::string model = "scripted-mock");

    static std::vector<ScriptedTurn> load_turns(const std::filesystem::path& path);
    static std::shared_ptr<ScriptedBackend> load(const std::filesystem::path& path,
                                                 std::string model = "scripted-mock");

    RawReply send(const ChatRequest& req) override;
    std::string model_name() const override { return model_; }

    std::size_t remaining() const;
    std::size_t consumed() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::deque<ScriptedTurn>> queues_;
    std::size_t consumed_ = 0;
    std::string model_;
};

struct OpenAIConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string api_key;
    std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat-completions endpoint.
class OpenAIBackend : public ChatBackend {
public:
    explicit OpenAIBackend(OpenAIConfig config);

    RawReply send(const ChatRequest& req) override;
    std::string model_name() const override { return config_.model; }

    /// Request body for `req`; exposed for wire-format tests.
    nlohmann::json request_body(const ChatRequest& req) const;
    static RawReply parse_reply(const std::string& body);

private:
    OpenAIConfig config_;
};

class LlmGateway {
public:
    static constexpr int kDefaultReasks = 2;

    explicit LlmGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy transport_retry = {},
                        int schema_reasks = kDefaultReasks);

    /// Sends `req`, re-asking up to `schema_reasks` times when the envelope
    /// does not validate. Every backend call is recorded in `ledger`.
    /// Throws SchemaError once re-asks are exhausted.
    ChatResponse complete(ChatRequest req, CostLedger& ledger);

    std::string model_name() const { return backend_->model_name(); }
    ChatBackend& backend() { return *backend_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    int reasks_;
};

}  // namespace pmr::llm
