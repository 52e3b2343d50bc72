#include "pmr/llm.hpp"

#include <fstream>

#include "pmr/envelope.hpp"
#include "pmr/error.hpp"
#include "pmr/prompts.hpp"
#include "pmr/text.hpp"

namespace pmr::llm {

using nlohmann::json;

std::string ChatRequest::prompt_text() const {
    std::string out;
    for (const auto& b : blocks) {
        if (!out.empty()) out.push_back('\n');
        out += b.text;
    }
    return out;
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::vector<ScriptedTurn> turns, std::string model)
    : model_(std::move(model)) {
    for (auto& t : turns) queues_[t.session].push_back(std::move(t));
}

std::vector<ScriptedTurn> ScriptedBackend::load_turns(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(0, "cannot open script " + path.string());
    std::vector<ScriptedTurn> turns;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            ScriptedTurn t;
            t.schema_id = j.at("schema_id").get<std::string>();
            if (j.contains("contains")) t.contains = j["contains"].get<std::string>();
            const auto& reply = j.at("reply");
            t.reply = reply.is_string() ? reply.get<std::string>() : reply.dump();
            if (j.contains("input_tokens")) t.input_tokens = j["input_tokens"].get<std::uint64_t>();
            if (j.contains("output_tokens")) t.output_tokens = j["output_tokens"].get<std::uint64_t>();
            t.session = j.value("session", "");
            turns.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw FormatError(lineno, path.filename().string() + ": " + e.what());
        }
    }
    return turns;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::filesystem::path& path,
                                                       std::string model) {
    return std::make_shared<ScriptedBackend>(load_turns(path), std::move(model));
}

RawReply ScriptedBackend::send(const ChatRequest& req) {
    std::lock_guard lock(mu_);
    auto it = queues_.find(req.session_id);
    if (it == queues_.end() || it->second.empty()) it = queues_.find("");
    if (it == queues_.end() || it->second.empty())
        throw ScriptMismatch("script exhausted at request for schema '" + req.schema_id +
                             "' (session '" + req.session_id + "')");
    auto& turn = it->second.front();
    if (turn.schema_id != req.schema_id)
        throw ScriptMismatch("expected schema '" + turn.schema_id + "' but request asked for '" +
                             req.schema_id + "' (session '" + req.session_id + "')");
    if (turn.contains && req.prompt_text().find(*turn.contains) == std::string::npos)
        throw ScriptMismatch("prompt for '" + req.schema_id + "' does not contain '" + *turn.contains + "'");
    RawReply r{turn.reply, turn.input_tokens, turn.output_tokens};
    it->second.pop_front();
    ++consumed_;
    return r;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, q] : queues_) n += q.size();
    return n;
}

std::size_t ScriptedBackend::consumed() const {
    std::lock_guard lock(mu_);
    return consumed_;
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, RetryPolicy transport_retry,
                       int schema_reasks)
    : backend_(std::move(backend)), retry_(std::move(transport_retry)), reasks_(schema_reasks) {
    if (!backend_) throw std::invalid_argument("LlmGateway needs a backend");
    schema::Registry::instance().require_all(prompts::schema_ids());
}

ChatResponse LlmGateway::complete(ChatRequest req, CostLedger& ledger) {
    bool has_user = false;
    for (const auto& b : req.blocks) has_user = has_user || b.role == Role::User;
    if (!has_user) throw std::invalid_argument("chat request without a user block");
    if (!schema::Registry::instance().has(req.schema_id))
        throw SchemaError(SchemaError::Kind::UnknownSchema, req.schema_id);

    for (int attempt = 0;; ++attempt) {
        auto reply = with_retry(retry_, [&] { return backend_->send(req); });

        ChatResponse resp;
        resp.raw_text = reply.text;
        resp.attempt = attempt;
        resp.estimated_tokens = !reply.input_tokens || !reply.output_tokens;
        resp.input_tokens = reply.input_tokens.value_or(estimate_tokens(req.prompt_text()));
        resp.output_tokens = reply.output_tokens.value_or(estimate_tokens(reply.text));
        ledger.record_llm(req.stage, resp.input_tokens, resp.output_tokens, resp.estimated_tokens,
                          req.schema_id);

        try {
            resp.parsed = schema::extract_envelope(reply.text, req.schema_id);
            return resp;
        } catch (const SchemaError& e) {
            if (attempt >= reasks_) throw;
            req.blocks.push_back({Role::User, prompts::corrective(req.schema_id, e.what())});
        }
    }
}

}  // namespace pmr::llm
