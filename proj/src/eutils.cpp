#include <atomic>
#include <sstream>

#include <httplib.h>

#include "pmr/error.hpp"
#include "pmr/pubmed.hpp"
#include "pmr/text.hpp"

namespace pmr::net {

namespace {
std::atomic<std::uint64_t> g_live_requests{0};
}

std::uint64_t live_request_count() { return g_live_requests.load(); }
void note_live_request() { ++g_live_requests; }

}  // namespace pmr::net

namespace pmr::pubmed {

EutilsBackend::EutilsBackend(EutilsConfig config, std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)), limiter_(std::move(limiter)) {
    if (!limiter_) limiter_ = std::make_shared<RateLimiter>(config_.api_key.empty() ? 3.0 : 10.0);
}

std::string EutilsBackend::get(const std::string& path,
                               const std::vector<std::pair<std::string, std::string>>& params) {
    httplib::Params query;
    for (const auto& [k, v] : params) query.emplace(k, v);
    if (!config_.api_key.empty()) query.emplace("api_key", config_.api_key);
    if (!config_.email.empty()) query.emplace("email", config_.email);
    if (!config_.tool.empty()) query.emplace("tool", config_.tool);

    limiter_->acquire();
    net::note_live_request();

    httplib::Client cli(config_.base_url);
    if (!cli.is_valid()) throw ConfigError("unusable E-utilities base url: " + config_.base_url);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    cli.set_follow_location(true);

    auto res = cli.Get(path, query, httplib::Headers{});
    if (!res) throw NetworkError("E-utilities request failed: " + httplib::to_string(res.error()));
    if (res->status == 429) throw RateLimited("E-utilities rate limit (HTTP 429)");
    if (res->status >= 500) throw NetworkError("E-utilities HTTP " + std::to_string(res->status));
    if (res->status != 200)
        throw Error("E-utilities HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    return res->body;
}

SearchResult EutilsBackend::search(const std::string& canonical_query, std::size_t max_records) {
    SearchResult out;
    out.query = canonical_query;
    out.fetched_at = std::chrono::system_clock::now();

    auto es = parse_esearch_json(get("/entrez/eutils/esearch.fcgi",
                                     {{"db", "pubmed"},
                                      {"term", canonical_query},
                                      {"retmax", std::to_string(max_records)},
                                      {"retmode", "json"},
                                      {"sort", "relevance"}}));
    out.total_hits = es.count;
    if (es.ids.size() > max_records) es.ids.resize(max_records);
    if (es.ids.empty()) return out;

    auto articles = parse_efetch_xml(get("/entrez/eutils/efetch.fcgi",
                                         {{"db", "pubmed"},
                                          {"id", text::join(es.ids, ",")},
                                          {"retmode", "xml"},
                                          {"rettype", "abstract"}}));
    std::map<std::string, EfetchArticle*> by_id;
    for (auto& a : articles) by_id[a.pmid] = &a;
    std::size_t rank = 0;
    for (const auto& id : es.ids) {
        ArticleRecord r;
        r.pmid = id;
        r.rank = ++rank;
        if (auto it = by_id.find(id); it != by_id.end()) {
            r.title = it->second->title;
            r.abstract = it->second->abstract;
            r.pub_date = it->second->pub_date;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

AbstractMap EutilsBackend::fetch(const std::vector<std::string>& pmids) {
    AbstractMap out;
    if (pmids.empty()) return out;
    auto articles = parse_efetch_xml(get("/entrez/eutils/efetch.fcgi",
                                         {{"db", "pubmed"},
                                          {"id", text::join(pmids, ",")},
                                          {"retmode", "xml"},
                                          {"rettype", "abstract"}}));
    for (auto& a : articles) out[a.pmid] = AbstractEntry{std::move(a.title), std::move(a.abstract), false};
    return out;
}

}  // namespace pmr::pubmed
