#include <httplib.h>

#include "pmr/error.hpp"
#include "pmr/llm.hpp"
#include "pmr/pubmed.hpp"

namespace pmr::llm {

using nlohmann::json;

OpenAIBackend::OpenAIBackend(OpenAIConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty()) throw ConfigError("chat backend needs an api key");
}

json OpenAIBackend::request_body(const ChatRequest& req) const {
    json messages = json::array();
    for (const auto& b : req.blocks)
        messages.push_back({{"role", b.role == Role::System ? "system" : "user"}, {"content", b.text}});
    json body{{"model", config_.model}, {"messages", messages}, {"temperature", req.temperature}};
    if (req.max_output_tokens) body["max_tokens"] = *req.max_output_tokens;
    return body;
}

RawReply OpenAIBackend::parse_reply(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw TransportError(std::string("unparseable chat reply: ") + e.what());
    }
    RawReply r;
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        r.text = content.is_string() ? content.get<std::string>() : std::string();
    } catch (const json::exception&) {
        throw TransportError("chat reply without choices[0].message.content");
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        const auto& u = j["usage"];
        if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned())
            r.input_tokens = u["prompt_tokens"].get<std::uint64_t>();
        if (u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned())
            r.output_tokens = u["completion_tokens"].get<std::uint64_t>();
    }
    return r;
}

RawReply OpenAIBackend::send(const ChatRequest& req) {
    httplib::Client cli(config_.base_url);
    if (!cli.is_valid()) throw ConfigError("unusable chat base url: " + config_.base_url);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    cli.set_bearer_token_auth(config_.api_key);

    net::note_live_request();
    auto res = cli.Post(config_.path, request_body(req).dump(), "application/json");
    if (!res) throw TransportError("chat request failed: " + httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimited("chat backend rate limit (HTTP 429)");
    if (res->status >= 500) throw TransportError("chat backend HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw Error("chat backend HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    return parse_reply(res->body);
}

}  // namespace pmr::llm
