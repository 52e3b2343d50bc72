#pragma once

// Literature search gateway: relevance-ranked PubMed search over either the
// live E-utilities service or an offline fixture corpus.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pmr/ledger.hpp"
#include "pmr/query.hpp"
#include "pmr/retry.hpp"

namespace pmr::pubmed {

struct ArticleRecord {
    std::string pmid;
    std::size_t rank = 0;  // 1-based
    std::string title;
    std::string abstract;
    std::optional<query::CalendarDate> pub_date;
};

struct SearchResult {
    std::string query;
    std::vector<ArticleRecord> records;
    std::size_t total_hits = 0;
    std::chrono::system_clock::time_point fetched_at{};

    /// Zero hits is a signal to broaden, not a failure.
    bool empty_result() const { return total_hits == 0; }
};

struct AbstractEntry {
    std::string title;
    std::string abstract;
    bool missing = false;
};

using AbstractMap = std::map<std::string, AbstractEntry>;

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual SearchResult search(const std::string& canonical_query, std::size_t max_records) = 0;
    virtual AbstractMap fetch(const std::vector<std::string>& pmids) = 0;
};

/// Offline corpus, one JSON object per line:
///   {"pmid": "123", "title": "...", "abstract": "...", "pub_date": "1995/03/01",
///    "mesh": ["Asthma", ...], "ranks": {"<canonical query>": 1, ...}}
/// `mesh` and `ranks` are optional. When any document carries a rank for the
/// exact query string, those documents form the result in rank order.
/// Otherwise documents are matched by evaluating the query and ranked by the
/// number of matched terms (descending), then pmid.
class FixtureCorpus : public SearchBackend {
public:
    struct Document {
        ArticleRecord article;  // rank unused
        std::vector<std::string> mesh;
        std::map<std::string, std::size_t> ranks;
    };

    FixtureCorpus() = default;
    explicit FixtureCorpus(std::vector<Document> docs);

    /// Loads a .jsonl file, or every .jsonl file in a directory (sorted by name).
    static FixtureCorpus load(const std::filesystem::path& path);

    SearchResult search(const std::string& canonical_query, std::size_t max_records) override;
    AbstractMap fetch(const std::vector<std::string>& pmids) override;

    const std::vector<Document>& documents() const { return docs_; }

    /// Number of the query's terms this document satisfies, or nullopt if the
    /// query as a whole does not match.
    static std::optional<std::size_t> match(const Document& doc, const query::QueryExpr& q);

private:
    std::vector<Document> docs_;
};

struct EutilsConfig {
    std::string base_url = "https://eutils.ncbi.nlm.nih.gov";
    std::string api_key;
    std::string email;
    std::string tool = "pmreasoner";
    std::chrono::seconds timeout{10};
};

/// NCBI E-utilities: esearch (relevance sort) followed by efetch for titles
/// and abstracts. Every HTTP request passes through the shared rate limiter.
class EutilsBackend : public SearchBackend {
public:
    EutilsBackend(EutilsConfig config, std::shared_ptr<RateLimiter> limiter);

    SearchResult search(const std::string& canonical_query, std::size_t max_records) override;
    AbstractMap fetch(const std::vector<std::string>& pmids) override;

private:
    std::string get(const std::string& path, const std::vector<std::pair<std::string, std::string>>& params);

    EutilsConfig config_;
    std::shared_ptr<RateLimiter> limiter_;
};

struct EsearchReply {
    std::size_t count = 0;
    std::vector<std::string> ids;
};

EsearchReply parse_esearch_json(const std::string& body);

struct EfetchArticle {
    std::string pmid;
    std::string title;
    std::string abstract;
    std::optional<query::CalendarDate> pub_date;
};

std::vector<EfetchArticle> parse_efetch_xml(const std::string& body);

/// Accepts YYYY, YYYY/MM/DD or YYYY-MM-DD.
std::optional<query::CalendarDate> parse_pub_date(const std::string& s);

class PubMedGateway {
public:
    static constexpr std::size_t kDefaultPageSize = 20;

    explicit PubMedGateway(std::shared_ptr<SearchBackend> backend, RetryPolicy retry = {});

    /// One ledger search call per invocation, regardless of internal retries.
    SearchResult search(const query::QueryExpr& q, std::size_t max_records, CostLedger& ledger,
                        Stage stage = Stage::RetrievalSearch);

    /// Deduplicates the input; every requested pmid is present in the result.
    AbstractMap fetch_abstracts(const std::vector<std::string>& pmids);

private:
    std::shared_ptr<SearchBackend> backend_;
    RetryPolicy retry_;
};

}  // namespace pmr::pubmed

namespace pmr::net {

/// Count of HTTP requests issued by live clients in this process.
std::uint64_t live_request_count();
void note_live_request();

}  // namespace pmr::net
