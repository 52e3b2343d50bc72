#include <gtest/gtest.h>

#include <regex>

#include "generators.hpp"
#include "pmr/error.hpp"
#include "pmr/query.hpp"

using namespace pmr::query;

namespace {

Term mesh(const std::string& s) { return {s, FieldTag::Mesh}; }
Term plain(const std::string& s) { return {s, FieldTag::Untagged}; }

// Independent reading of the grammar: split on parentheses and the operator
// words with plain string scanning, then read tags by suffix.
struct OracleClause {
    std::vector<std::string> terms;  // raw "text[tag]" pieces
    bool group = false;
};

std::vector<std::string> split_on(const std::string& s, const std::string& sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (auto pos = s.find(sep); pos != std::string::npos; pos = s.find(sep, start)) {
        out.push_back(s.substr(start, pos - start));
        start = pos + sep.size();
    }
    out.push_back(s.substr(start));
    return out;
}

std::vector<OracleClause> oracle_split(const std::string& q) {
    std::vector<OracleClause> out;
    for (auto& part : split_on(q, " AND ")) {
        OracleClause c;
        if (!part.empty() && part.front() == '(' && part.back() == ')') {
            c.group = true;
            c.terms = split_on(part.substr(1, part.size() - 2), " OR ");
        } else {
            c.terms = {part};
        }
        out.push_back(c);
    }
    return out;
}

Term oracle_term(const std::string& raw) {
    static const std::regex tagged(R"(^(.*)\[(mesh|MeSH|Mesh)\]$)");
    std::smatch m;
    if (std::regex_match(raw, m, tagged)) return mesh(m[1]);
    return plain(raw);
}

}  // namespace

TEST(QueryParse, SingleMeshTerm) {
    auto q = parse_query("asthma[mesh]");
    ASSERT_EQ(q.clauses.size(), 1u);
    EXPECT_EQ(std::get<Term>(q.clauses[0]), mesh("asthma"));
}

TEST(QueryParse, OrGroupMatchesHandAppliedGrammar) {
    const std::string input = "(Lithium[mesh] OR Valproic Acid[mesh]) AND Humans[mesh]";
    QueryExpr expected;
    expected.clauses.emplace_back(OrGroup{{mesh("Lithium"), mesh("Valproic Acid")}});
    expected.clauses.emplace_back(mesh("Humans"));
    EXPECT_EQ(parse_query(input), expected);

    auto split = oracle_split(input);
    ASSERT_EQ(split.size(), 2u);
    EXPECT_TRUE(split[0].group);
    EXPECT_EQ(oracle_term(split[0].terms[0]), mesh("Lithium"));
    EXPECT_EQ(oracle_term(split[0].terms[1]), mesh("Valproic Acid"));
    EXPECT_EQ(oracle_term(split[1].terms[0]), mesh("Humans"));
}

TEST(QueryParse, AgreesWithBruteForceTokenizerOnRandomDateFreeQueries) {
    std::mt19937 rng(7);
    for (int i = 0; i < 300; ++i) {
        auto q = pmrt::random_query(rng);
        std::erase_if(q.clauses, [](const Clause& c) { return std::holds_alternative<DateRange>(c); });
        if (q.clauses.empty()) continue;
        auto text = render_query(q);
        auto parsed = parse_query(text);
        auto split = oracle_split(text);
        ASSERT_EQ(parsed.clauses.size(), split.size()) << text;
        for (std::size_t k = 0; k < split.size(); ++k) {
            if (split[k].group) {
                const auto* g = std::get_if<OrGroup>(&parsed.clauses[k]);
                ASSERT_NE(g, nullptr) << text;
                ASSERT_EQ(g->terms.size(), split[k].terms.size());
                for (std::size_t j = 0; j < g->terms.size(); ++j) EXPECT_EQ(g->terms[j], oracle_term(split[k].terms[j]));
            } else {
                EXPECT_EQ(std::get<Term>(parsed.clauses[k]), oracle_term(split[k].terms[0])) << text;
            }
        }
    }
}

TEST(QueryParse, DanglingOperatorIsSyntaxError) {
    EXPECT_THROW(parse_query("asthma AND"), pmr::SyntaxError);
    EXPECT_THROW(parse_query(""), pmr::SyntaxError);
    EXPECT_THROW(parse_query("(a OR b"), pmr::SyntaxError);
    EXPECT_THROW(parse_query("a OR b"), pmr::SyntaxError);
}

TEST(QueryParse, DatesYearAndDayPrecision) {
    auto q = parse_query("1990:2000[pdat] AND 2001/02/03:2002/12/31[pdat]");
    EXPECT_EQ(std::get<DateRange>(q.clauses[0]), DateRange::years(1990, 2000));
    auto d = std::get<DateRange>(q.clauses[1]);
    EXPECT_EQ(d.start, (CalendarDate{2001, 2, 3}));
    EXPECT_EQ(d.end, (CalendarDate{2002, 12, 31}));
}

TEST(QueryRender, SingleTerm) {
    QueryExpr q;
    q.clauses.emplace_back(mesh("asthma"));
    EXPECT_EQ(render_query(q), "asthma[mesh]");
}

TEST(QueryNormalize, DateAfterMesh) {
    QueryExpr q;
    q.clauses.emplace_back(DateRange::years(1990, 2000));
    q.clauses.emplace_back(mesh("Asthma"));
    EXPECT_EQ(render_query(normalize_query(q)), "Asthma[mesh] AND 1990:2000[pdat]");
}

TEST(QueryNormalize, FieldTagPriority) {
    auto q = normalize_query(parse_query("children AND 1990:2000[pdat] AND Asthma[mesh]"));
    EXPECT_EQ(render_query(q), "Asthma[mesh] AND 1990:2000[pdat] AND children");
}

TEST(QueryNormalize, DuplicateElimination) {
    EXPECT_EQ(render_query(normalize_query(parse_query("Asthma[mesh] AND Asthma[mesh]"))), "Asthma[mesh]");
}

TEST(QueryNormalize, SingletonGroupCollapses) {
    auto q = normalize_query(parse_query("(Asthma[mesh] OR asthma[mesh]) AND children"));
    EXPECT_EQ(render_query(q), "Asthma[mesh] AND children");
}

TEST(QueryNormalize, AlreadyNormalIsUnchanged) {
    auto q = parse_query("Asthma[mesh] AND (Lithium[mesh] OR Humans[mesh]) AND 1990:2000[pdat] AND children");
    EXPECT_TRUE(is_normalized(q));
    EXPECT_EQ(normalize_query(q), q);
}

TEST(QueryMesh, TermsOfQuery) {
    EXPECT_EQ(mesh_terms_of(parse_query("A[mesh] AND (B[mesh] OR C[mesh]) AND d")),
              (std::set<std::string>{"a", "b", "c"}));
    EXPECT_EQ(mesh_terms_of(parse_query("Asthma[mesh] AND asthma[mesh]")), (std::set<std::string>{"asthma"}));
}

TEST(QueryValidate, RejectsBrokenTrees) {
    QueryExpr empty;
    EXPECT_TRUE(validate(empty).has_value());
    QueryExpr single_or;
    single_or.clauses.emplace_back(OrGroup{{mesh("a")}});
    EXPECT_TRUE(validate(single_or).has_value());
    QueryExpr backwards;
    backwards.clauses.emplace_back(DateRange::years(2001, 2000));
    EXPECT_TRUE(validate(backwards).has_value());
    QueryExpr opword;
    opword.clauses.emplace_back(plain("salt AND pepper"));
    EXPECT_TRUE(validate(opword).has_value());
}

TEST(QueryWindow, InjectedThenNormalized) {
    auto q = parse_query("children AND Asthma[mesh]");
    EXPECT_TRUE(enforce_date_window(q, DateRange::years(1990, 2000)));
    EXPECT_EQ(render_query(q), "Asthma[mesh] AND 1990:2000[pdat] AND children");
    EXPECT_FALSE(enforce_date_window(q, DateRange::years(1990, 2000)));
}

TEST(QueryWindow, ReplacesForeignWindow) {
    auto q = parse_query("Asthma[mesh] AND 1980:1985[pdat]");
    enforce_date_window(q, DateRange::years(1990, 2000));
    EXPECT_EQ(render_query(q), "Asthma[mesh] AND 1990:2000[pdat]");
}

TEST(QueryBroaden, DropsUntaggedThenDemotesMesh) {
    auto b = broaden(parse_query("Asthma[mesh] AND Leukotrienes[mesh] AND children"));
    ASSERT_TRUE(b);
    EXPECT_EQ(render_query(b->query), "Asthma[mesh] AND Leukotrienes[mesh]");
    auto c = broaden(b->query);
    ASSERT_TRUE(c);
    EXPECT_EQ(render_query(c->query), "Asthma[mesh] AND Leukotrienes");
}

// Property suite over random valid trees.

TEST(QueryProperty, RoundTripIdempotenceAndOrdering) {
    std::mt19937 rng(20240501);
    for (int i = 0; i < 500; ++i) {
        auto q = pmrt::random_query(rng);
        ASSERT_FALSE(validate(q).has_value()) << render_query(q);
        auto text = render_query(q);
        EXPECT_EQ(parse_query(text), q) << text;
        auto n = normalize_query(q);
        EXPECT_EQ(normalize_query(n), n) << text;
        EXPECT_TRUE(std::is_sorted(n.clauses.begin(), n.clauses.end(),
                                   [](const Clause& a, const Clause& b) { return classify(a) < classify(b); }))
            << render_query(n);
        EXPECT_FALSE(validate(n).has_value());
        EXPECT_EQ(mesh_terms_of(n), mesh_terms_of(q));
    }
}

TEST(QueryProperty, BroadeningNeverAddsTerms) {
    std::mt19937 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto q = normalize_query(pmrt::random_query(rng));
        auto b = broaden(q);
        if (!b) continue;
        EXPECT_LE(term_count(b->query), term_count(q));
        EXPECT_FALSE(validate(b->query).has_value());
        EXPECT_NE(render_query(b->query), render_query(q));
    }
}
