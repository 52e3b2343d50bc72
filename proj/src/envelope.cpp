#include "pmr/envelope.hpp"

#include <stdexcept>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::schema {

using nlohmann::json;
using Kind = SchemaError::Kind;

namespace {

[[noreturn]] void missing(const std::string& what) { throw SchemaError(Kind::MissingFields, what); }
[[noreturn]] void bad_enum(const std::string& what) { throw SchemaError(Kind::BadEnum, what); }

const json& require(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) missing(std::string("missing field '") + key + "'");
    return obj.at(key);
}

std::string as_string(const json& v, const char* key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return v.dump();
    missing(std::string("field '") + key + "' is not a string");
}

std::string require_string(const json& obj, const char* key) {
    return as_string(require(obj, key), key);
}

std::string optional_string(const json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return {};
    return as_string(obj.at(key), key);
}

const json& require_array(const json& obj, const char* key) {
    const auto& v = require(obj, key);
    if (!v.is_array()) missing(std::string("field '") + key + "' is not an array");
    return v;
}

bool require_yes_no(const json& v, const std::string& where) {
    auto b = yes_no(v);
    if (!b) bad_enum(where + " must be yes/no, got " + v.dump());
    return *b;
}

int feedback_int(const json& v, const std::string& where) {
    long long x = 0;
    if (v.is_number_integer()) {
        x = v.get<long long>();
    } else if (v.is_string() && (v.get<std::string>() == "-1" || v.get<std::string>() == "0" ||
                                 v.get<std::string>() == "1")) {
        x = std::stoll(v.get<std::string>());
    } else {
        bad_enum(where + " must be an integer in {-1,0,1}, got " + v.dump());
    }
    if (x < -1 || x > 1) bad_enum(where + " must be in {-1,0,1}, got " + v.dump());
    return static_cast<int>(x);
}

json validate_feedback(const json& fb) {
    if (!fb.is_object()) missing("feedback is not an object");
    json out = json::object();
    for (const char* dim : {"coverage", "alignment", "redundancy"}) {
        out[dim] = feedback_int(require(fb, dim), std::string("feedback.") + dim);
        auto key = std::string(dim) + "_suggestion";
        out[key] = optional_string(fb, key.c_str());
    }
    return out;
}

json term_list(const json& arr, bool with_rationale) {
    json out = json::array();
    for (const auto& e : arr) {
        std::string term, rationale;
        if (e.is_string()) {
            term = e.get<std::string>();
        } else if (e.is_object()) {
            term = e.contains("term") ? as_string(e["term"], "term") : require_string(e, "mesh");
            rationale = optional_string(e, "rationale");
        } else {
            missing("term entry is neither a string nor an object");
        }
        term = text::squeeze(term);
        if (term.empty()) missing("empty term");
        json item = {{"term", term}};
        if (with_rationale) item["rationale"] = rationale;
        out.push_back(std::move(item));
    }
    return out;
}

json query_envelope(const json& v) {
    auto q = text::squeeze(require_string(v, "query"));
    if (q.empty()) missing("empty query");
    return {{"query", q}, {"rationale", optional_string(v, "rationale")}};
}

json critique_dimension(const json& v, const std::string& where, bool redundancy) {
    json out;
    if (v.is_object()) {
        const json* verdict = nullptr;
        for (const char* k : {"verdict", "value", "answer"})
            if (v.contains(k)) {
                verdict = &v.at(k);
                break;
            }
        if (!verdict) missing(where + ".verdict");
        out["verdict"] = require_yes_no(*verdict, where);
        out["rationale"] = optional_string(v, "rationale");
        if (redundancy) {
            auto hint = optional_string(v, "boolean_hint");
            if (!hint.empty()) out["boolean_hint"] = hint;
        }
    } else {
        out["verdict"] = require_yes_no(v, where);
        out["rationale"] = "";
    }
    return out;
}

json validate_critique(const json& v) {
    if (!v.is_object()) missing("critique is not an object");
    bool has_terms = v.contains("terms");
    bool has_fb = v.contains("feedback");
    if (!has_terms && !has_fb) missing("critique needs 'terms' or 'feedback'");

    json out = json::object();
    json terms = json::array();
    if (has_terms) {
        for (const auto& t : require_array(v, "terms")) {
            auto name = text::squeeze(require_string(t, "term"));
            if (name.empty()) missing("empty critique term");
            terms.push_back({{"term", name},
                             {"coverage", critique_dimension(require(t, "coverage"), name + ".coverage", false)},
                             {"alignment", critique_dimension(require(t, "alignment"), name + ".alignment", false)},
                             {"redundancy",
                              critique_dimension(require(t, "redundancy"), name + ".redundancy", true)}});
        }
    }
    out["terms"] = terms;
    if (has_fb) {
        out["feedback"] = validate_feedback(v.at("feedback"));
        out["feedback_derived"] = false;
    } else {
        bool cov = true, align = true, no_redundant = true;
        for (const auto& t : terms) {
            cov = cov && t["coverage"]["verdict"].get<bool>();
            align = align && t["alignment"]["verdict"].get<bool>();
            no_redundant = no_redundant && !t["redundancy"]["verdict"].get<bool>();
        }
        out["feedback"] = {{"coverage", cov ? 1 : 0},         {"coverage_suggestion", ""},
                           {"alignment", align ? 1 : 0},      {"alignment_suggestion", ""},
                           {"redundancy", no_redundant ? 1 : 0}, {"redundancy_suggestion", ""}};
        out["feedback_derived"] = true;
    }
    out["form"] = has_terms && has_fb ? "both" : has_terms ? "per_term" : "aggregate";
    return out;
}

json validate_update(const json& v) {
    json out = {{"terms", term_list(require_array(v, "terms"), true)}, {"changes", json::array()}};
    if (v.contains("changes") && v["changes"].is_array()) {
        for (const auto& c : v["changes"]) {
            auto action = text::lower(require_string(c, "action"));
            if (action != "removed" && action != "merged" && action != "rerationalized" &&
                action != "added" && action != "kept")
                bad_enum("unknown pool change action '" + action + "'");
            json item = {{"term", text::squeeze(require_string(c, "term"))}, {"action", action}};
            auto into = optional_string(c, "into");
            if (!into.empty()) item["into"] = into;
            out["changes"].push_back(std::move(item));
        }
    }
    return out;
}

json validate_judge(const json& v) {
    json out = json::object();
    for (const char* side : {"Answer A", "Answer B"}) {
        const auto& block = require(v, side);
        json scores = json::object();
        for (auto dim : kJudgeDimensions) {
            std::string d(dim);
            const auto& entry = require(block, d.c_str());
            const auto& score = require(entry, "score");
            long long s = 0;
            if (score.is_number_integer())
                s = score.get<long long>();
            else if (score.is_string() && text::all_digits(score.get<std::string>()))
                s = std::stoll(score.get<std::string>());
            else
                bad_enum(std::string(side) + "." + d + ".score is not an integer");
            if (s < 1 || s > 5) bad_enum(std::string(side) + "." + d + ".score outside 1..5");
            scores[d] = {{"score", s}, {"justification", optional_string(entry, "justification")}};
        }
        out[side] = std::move(scores);
    }
    const json* verdict = nullptr;
    for (const char* k : {"verdict", "Verdict", "overall_verdict", "Overall Verdict"})
        if (v.contains(k)) {
            verdict = &v.at(k);
            break;
        }
    if (!verdict) missing("missing field 'verdict'");
    auto vs = text::lower(as_string(*verdict, "verdict"));
    if (vs == "a") out["verdict"] = "A";
    else if (vs == "b") out["verdict"] = "B";
    else if (vs == "tie") out["verdict"] = "tie";
    else bad_enum("verdict must be A, B or tie, got " + verdict->dump());
    return out;
}

std::string strip_fences(std::string_view raw) {
    std::string out;
    std::size_t start = 0;
    while (start < raw.size()) {
        auto nl = raw.find('\n', start);
        auto line = raw.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (text::trim(line).substr(0, 3) != "```") {
            out.append(line);
            out.push_back('\n');
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string drop_trailing_commas(std::string_view s) {
    std::string out;
    bool in_str = false, esc = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            out.push_back(c);
            if (esc) esc = false;
            else if (c == '\\') esc = true;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        if (c == ',') {
            std::size_t j = i + 1;
            while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
        }
        out.push_back(c);
    }
    return out;
}

// Index one past the brace matching s[open], or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    bool in_str = false, esc = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            if (esc) esc = false;
            else if (c == '\\') esc = true;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

}  // namespace

std::optional<bool> yes_no(const json& v) {
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_string()) {
        auto s = text::lower(text::trim(v.get<std::string>()));
        if (s == "yes" || s == "true") return true;
        if (s == "no" || s == "false") return false;
    }
    return std::nullopt;
}

std::optional<json> find_first_object(std::string_view raw) {
    auto body = strip_fences(raw);
    std::string_view s = body;
    for (auto open = s.find('{'); open != std::string_view::npos; open = s.find('{', open + 1)) {
        auto end = match_brace(s, open);
        if (end == std::string_view::npos) continue;
        auto candidate = drop_trailing_commas(s.substr(open, end - open));
        auto parsed = json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
    return std::nullopt;
}

Registry::Registry() {
    auto add = [&](std::string_view id, Validator v, std::string example) {
        entries_.push_back({std::string(id), std::move(v), std::move(example)});
    };

    add(kMeshCandidates,
        [](const json& v) {
            const json* arr = nullptr;
            if (v.contains("terms")) arr = &require_array(v, "terms");
            else arr = &require_array(v, "mesh_terms");
            return json{{"terms", term_list(*arr, true)}};
        },
        R"({"terms": [{"term": "MeSH heading", "rationale": "why it is relevant"}]})");

    add(kMeshSelection,
        [](const json& v) {
            json sel = json::array();
            for (const auto& t : term_list(require_array(v, "selected"), false)) sel.push_back(t["term"]);
            return json{{"selected", sel}, {"rationale", optional_string(v, "rationale")}};
        },
        R"({"selected": ["MeSH heading", "..."], "rationale": "why these terms"})");

    add(kQuery, query_envelope,
        R"({"query": "The final PubMed query string as a single string.", "rationale": "..."})");

    add(kCritique, validate_critique,
        R"({"terms": [{"term": "Asthma", "coverage": {"verdict": "Yes", "rationale": "..."}, )"
        R"("alignment": {"verdict": "Yes", "rationale": "..."}, )"
        R"("redundancy": {"verdict": "No", "rationale": "...", "boolean_hint": "AND"}}], )"
        R"("feedback": {"coverage": 1, "coverage_suggestion": "...", "alignment": 1, )"
        R"("alignment_suggestion": "...", "redundancy": 1, "redundancy_suggestion": "..."}})");

    add(kMeshUpdate, validate_update,
        R"({"terms": [{"term": "MeSH heading", "rationale": "..."}], )"
        R"("changes": [{"term": "Old heading", "action": "removed"}]})");

    add(kRefinedQuery,
        [](const json& v) {
            auto out = query_envelope(v);
            if (v.contains("feedback") && v["feedback"].is_object())
                out["feedback"] = validate_feedback(v["feedback"]);
            return out;
        },
        R"({"query": "The final PubMed query string as a single string.", "rationale": "...", )"
        R"("feedback": {"coverage": 1, "coverage_suggestion": "...", "alignment": 1, )"
        R"("alignment_suggestion": "...", "redundancy": 1, "redundancy_suggestion": "..."}})");

    add(kFilter,
        [](const json& v) { return json{{"verdicts", require_array(v, "verdicts")}}; },
        R"({"verdicts": [{"pmid": "12345", "keep": "Yes", "rationale": "..."}]})");

    add(kExtract,
        [](const json& v) { return json{{"items", require_array(v, "items")}}; },
        R"({"items": [{"pmid": "12345", "passage": "...", "aligned": "Yes", "rationale": "..."}]})");

    add(kReflection,
        [](const json& v) {
            json out;
            out["is_sufficient"] = require_yes_no(require(v, "is_sufficient"), "is_sufficient");
            out["rationale"] = optional_string(v, "rationale");
            json needed = json::array();
            if (v.contains("needed_pmids") && v["needed_pmids"].is_array())
                for (const auto& p : v["needed_pmids"]) needed.push_back(as_string(p, "needed_pmids"));
            out["needed_pmids"] = needed;
            return out;
        },
        R"({"is_sufficient": true, "rationale": "...", "needed_pmids": []})");

    add(kSummary,
        [](const json& v) { return json{{"verified_sources", require_string(v, "verified_sources")}}; },
        R"({"verified_sources": "The final rewritten paragraph as a single string."})");

    add(kAnswer,
        [](const json& v) {
            return json{{"answer", require_string(v, "answer")}, {"rationale", optional_string(v, "rationale")}};
        },
        R"({"answer": "Your answer according to the task instruction.", "rationale": "..."})");

    add(kSelfReflection, query_envelope,
        R"({"query": "The final PubMed query string as a single string.", "rationale": "..."})");

    add(kJudge, validate_judge,
        R"({"Answer A": {"Reasoning Soundness": {"score": 4, "justification": "..."}, ...}, )"
        R"("Answer B": {...}, "verdict": "A"})");
}

const Registry& Registry::instance() {
    static const Registry registry;
    return registry;
}

bool Registry::has(std::string_view id) const {
    for (const auto& e : entries_)
        if (e.id == id) return true;
    return false;
}

std::vector<std::string> Registry::ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.id);
    return out;
}

json Registry::validate(std::string_view id, const json& value) const {
    for (const auto& e : entries_)
        if (e.id == id) {
            try {
                return e.validator(value);
            } catch (const json::exception& ex) {
                throw SchemaError(Kind::MissingFields, std::string("type mismatch: ") + ex.what());
            }
        }
    throw SchemaError(Kind::UnknownSchema, "no validator for schema '" + std::string(id) + "'");
}

const std::string& Registry::example(std::string_view id) const {
    for (const auto& e : entries_)
        if (e.id == id) return e.example;
    throw SchemaError(Kind::UnknownSchema, "no validator for schema '" + std::string(id) + "'");
}

void Registry::require_all(const std::vector<std::string>& ids) const {
    for (const auto& id : ids)
        if (!has(id)) throw std::logic_error("schema registry has no validator for '" + id + "'");
}

json extract_envelope(std::string_view raw, std::string_view schema_id) {
    auto obj = find_first_object(raw);
    if (!obj) throw SchemaError(Kind::NoObjectFound, "no JSON object in reply");
    return Registry::instance().validate(schema_id, *obj);
}

}  // namespace pmr::schema
