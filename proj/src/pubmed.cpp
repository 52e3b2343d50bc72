#include "pmr/pubmed.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::pubmed {

using nlohmann::json;

std::optional<query::CalendarDate> parse_pub_date(const std::string& raw) {
    auto s = std::string(text::trim(raw));
    if (s.size() == 4 && text::all_digits(s)) return query::CalendarDate{std::stoi(s), {}, {}};
    if (s.size() == 10 && (s[4] == '/' || s[4] == '-') && s[7] == s[4]) {
        auto y = s.substr(0, 4), m = s.substr(5, 2), d = s.substr(8, 2);
        if (text::all_digits(y) && text::all_digits(m) && text::all_digits(d))
            return query::CalendarDate{std::stoi(y), std::stoi(m), std::stoi(d)};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Fixture corpus

namespace {

bool date_in_range(const std::optional<query::CalendarDate>& date, const query::DateRange& r) {
    if (!date) return false;
    if (!r.start.has_day() || !date->has_day())
        return date->year >= r.start.year && date->year <= r.end.year;
    return !(*date < r.start) && !(r.end < *date);
}

bool term_matches(const FixtureCorpus::Document& doc, const query::Term& t) {
    if (t.tag == query::FieldTag::Mesh && !doc.mesh.empty()) {
        return std::any_of(doc.mesh.begin(), doc.mesh.end(),
                           [&](const std::string& m) { return text::iequals(m, t.text); });
    }
    if (text::icontains(doc.article.title, t.text) || text::icontains(doc.article.abstract, t.text))
        return true;
    return std::any_of(doc.mesh.begin(), doc.mesh.end(),
                       [&](const std::string& m) { return text::icontains(m, t.text); });
}

}  // namespace

FixtureCorpus::FixtureCorpus(std::vector<Document> docs) : docs_(std::move(docs)) {
    std::set<std::string> seen;
    for (const auto& d : docs_) {
        if (!text::all_digits(d.article.pmid))
            throw FormatError(0, "fixture pmid is not a digit string: " + d.article.pmid);
        if (!seen.insert(d.article.pmid).second)
            throw FormatError(0, "duplicate fixture pmid " + d.article.pmid);
    }
}

FixtureCorpus FixtureCorpus::load(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(path)) {
        for (const auto& e : std::filesystem::directory_iterator(path))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
    } else {
        files.push_back(path);
    }

    std::vector<Document> docs;
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw FormatError(0, "cannot open fixture corpus " + file.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim(line).empty()) continue;
            json j;
            try {
                j = json::parse(line);
                Document d;
                d.article.pmid = j.at("pmid").is_string() ? j.at("pmid").get<std::string>()
                                                          : std::to_string(j.at("pmid").get<long long>());
                d.article.title = j.value("title", "");
                d.article.abstract = j.value("abstract", "");
                if (j.contains("pub_date") && j["pub_date"].is_string())
                    d.article.pub_date = parse_pub_date(j["pub_date"].get<std::string>());
                if (j.contains("mesh")) d.mesh = j["mesh"].get<std::vector<std::string>>();
                if (j.contains("ranks"))
                    for (const auto& [q, r] : j["ranks"].items()) d.ranks[q] = r.get<std::size_t>();
                docs.push_back(std::move(d));
            } catch (const json::exception& e) {
                throw FormatError(lineno, file.filename().string() + ": " + e.what());
            }
        }
    }
    return FixtureCorpus(std::move(docs));
}

std::optional<std::size_t> FixtureCorpus::match(const Document& doc, const query::QueryExpr& q) {
    std::size_t matched = 0;
    for (const auto& c : q.clauses) {
        if (const auto* t = std::get_if<query::Term>(&c)) {
            if (!term_matches(doc, *t)) return std::nullopt;
            ++matched;
        } else if (const auto* d = std::get_if<query::DateRange>(&c)) {
            if (!date_in_range(doc.article.pub_date, *d)) return std::nullopt;
        } else {
            std::size_t in_group = 0;
            for (const auto& t : std::get<query::OrGroup>(c).terms)
                if (term_matches(doc, t)) ++in_group;
            if (in_group == 0) return std::nullopt;
            matched += in_group;
        }
    }
    return matched;
}

SearchResult FixtureCorpus::search(const std::string& canonical_query, std::size_t max_records) {
    struct Hit {
        const Document* doc;
        std::size_t key;
    };
    std::vector<Hit> hits;
    bool explicit_ranks = false;
    for (const auto& d : docs_) {
        auto it = d.ranks.find(canonical_query);
        if (it != d.ranks.end()) {
            explicit_ranks = true;
            hits.push_back({&d, it->second});
        }
    }

    if (explicit_ranks) {
        std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            if (a.key != b.key) return a.key < b.key;
            return text::pmid_less(a.doc->article.pmid, b.doc->article.pmid);
        });
    } else {
        auto q = query::parse_query(canonical_query);
        for (const auto& d : docs_)
            if (auto n = match(d, q)) hits.push_back({&d, *n});
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
            if (a.key != b.key) return a.key > b.key;
            return text::pmid_less(a.doc->article.pmid, b.doc->article.pmid);
        });
    }

    SearchResult out;
    out.query = canonical_query;
    out.total_hits = hits.size();
    out.fetched_at = std::chrono::system_clock::now();
    for (std::size_t i = 0; i < hits.size() && i < max_records; ++i) {
        ArticleRecord rec = hits[i].doc->article;
        rec.rank = i + 1;
        out.records.push_back(std::move(rec));
    }
    return out;
}

AbstractMap FixtureCorpus::fetch(const std::vector<std::string>& pmids) {
    AbstractMap out;
    for (const auto& id : pmids) {
        auto it = std::find_if(docs_.begin(), docs_.end(),
                               [&](const Document& d) { return d.article.pmid == id; });
        if (it == docs_.end())
            out[id] = AbstractEntry{{}, {}, true};
        else
            out[id] = AbstractEntry{it->article.title, it->article.abstract, false};
    }
    return out;
}

// ---------------------------------------------------------------------------
// E-utilities payload parsing

EsearchReply parse_esearch_json(const std::string& body) {
    try {
        auto j = json::parse(body);
        const auto& r = j.at("esearchresult");
        if (r.contains("ERROR")) throw NetworkError("esearch error: " + r["ERROR"].dump());
        EsearchReply out;
        const auto& count = r.at("count");
        out.count = count.is_string() ? std::stoull(count.get<std::string>()) : count.get<std::size_t>();
        for (const auto& id : r.at("idlist")) out.ids.push_back(id.get<std::string>());
        return out;
    } catch (const json::exception& e) {
        throw NetworkError(std::string("malformed esearch reply: ") + e.what());
    }
}

namespace {

std::string decode_entities(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        auto ent = s.substr(i + 1, semi - i - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (!ent.empty() && ent[0] == '#') {
            unsigned long cp = 0;
            try {
                cp = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')
                         ? std::stoul(std::string(ent.substr(2)), nullptr, 16)
                         : std::stoul(std::string(ent.substr(1)));
            } catch (...) {
                out.append(s.substr(i, semi - i + 1));
                i = semi;
                continue;
            }
            // UTF-8 encode
            if (cp < 0x80) {
                out += static_cast<char>(cp);
            } else if (cp < 0x800) {
                out += static_cast<char>(0xC0 | (cp >> 6));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else if (cp < 0x10000) {
                out += static_cast<char>(0xE0 | (cp >> 12));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
                out += static_cast<char>(0xF0 | (cp >> 18));
                out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            }
        } else {
            out.append(s.substr(i, semi - i + 1));
        }
        i = semi;
    }
    return out;
}

std::string strip_tags(std::string_view s) {
    std::string out;
    bool in_tag = false;
    for (char c : s) {
        if (c == '<') in_tag = true;
        else if (c == '>') in_tag = false;
        else if (!in_tag) out.push_back(c);
    }
    return out;
}

// Contents of every <tag ...>...</tag> element in `s`, in order.
std::vector<std::string_view> elements(std::string_view s, std::string_view tag) {
    std::vector<std::string_view> out;
    std::string open = "<" + std::string(tag);
    std::string close = "</" + std::string(tag) + ">";
    std::size_t pos = 0;
    while ((pos = s.find(open, pos)) != std::string_view::npos) {
        auto after = pos + open.size();
        if (after >= s.size() || (s[after] != '>' && s[after] != ' ')) {
            pos = after;
            continue;
        }
        auto gt = s.find('>', after);
        if (gt == std::string_view::npos) break;
        if (s[gt - 1] == '/') {  // self-closing
            out.emplace_back();
            pos = gt + 1;
            continue;
        }
        auto end = s.find(close, gt + 1);
        if (end == std::string_view::npos) break;
        out.push_back(s.substr(gt + 1, end - gt - 1));
        pos = end + close.size();
    }
    return out;
}

std::string first_text(std::string_view s, std::string_view tag) {
    auto els = elements(s, tag);
    return els.empty() ? std::string() : text::squeeze(decode_entities(strip_tags(els.front())));
}

}  // namespace

std::vector<EfetchArticle> parse_efetch_xml(const std::string& body) {
    std::vector<EfetchArticle> out;
    for (auto article : elements(body, "PubmedArticle")) {
        EfetchArticle a;
        a.pmid = first_text(article, "PMID");
        a.title = first_text(article, "ArticleTitle");
        std::vector<std::string> parts;
        for (auto abs : elements(article, "AbstractText"))
            parts.push_back(text::squeeze(decode_entities(strip_tags(abs))));
        a.abstract = text::join(parts, " ");
        auto pubdate = elements(article, "PubDate");
        if (!pubdate.empty()) {
            auto year = first_text(pubdate.front(), "Year");
            if (year.empty()) {
                auto medline = first_text(pubdate.front(), "MedlineDate");
                if (medline.size() >= 4) year = medline.substr(0, 4);
            }
            if (year.size() == 4 && text::all_digits(year))
                a.pub_date = query::CalendarDate{std::stoi(year), {}, {}};
        }
        if (!a.pmid.empty()) out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gateway

PubMedGateway::PubMedGateway(std::shared_ptr<SearchBackend> backend, RetryPolicy retry)
    : backend_(std::move(backend)), retry_(std::move(retry)) {}

SearchResult PubMedGateway::search(const query::QueryExpr& q, std::size_t max_records,
                                   CostLedger& ledger, Stage stage) {
    if (max_records == 0) throw std::invalid_argument("max_records must be positive");
    auto canonical = query::render_query(q);
    ledger.record_search(stage, canonical);
    return with_retry(retry_, [&] { return backend_->search(canonical, max_records); });
}

AbstractMap PubMedGateway::fetch_abstracts(const std::vector<std::string>& pmids) {
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (const auto& id : pmids) {
        if (!text::all_digits(id)) throw std::invalid_argument("invalid pmid: " + id);
        if (seen.insert(id).second) unique.push_back(id);
    }
    auto got = with_retry(retry_, [&] { return backend_->fetch(unique); });
    for (const auto& id : unique)
        if (!got.count(id)) got[id] = AbstractEntry{{}, {}, true};
    return got;
}

}  // namespace pmr::pubmed
