#pragma once

// PubMed boolean query language: AST, parser, canonical renderer and the
// rule-based normalizer applied to every drafted query before it is issued.
//
// Grammar (the subset the drafting prompts allow):
//
//   query   := clause (AND clause)*
//   clause  := term | date | '(' term (OR term)* ')'
//   term    := text ['[mesh]']
//   date    := YYYY:YYYY[pdat] | YYYY/MM/DD:YYYY/MM/DD[pdat]
//
// Operators are the upper-case words AND / OR. Field tags are case-insensitive
// on input and rendered lower-case.

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pmr::query {

enum class FieldTag { Mesh, PubDate, Untagged };

struct CalendarDate {
    int year = 0;
    std::optional<int> month;  // month and day are both set or both empty
    std::optional<int> day;

    bool has_day() const { return day.has_value(); }
    auto operator<=>(const CalendarDate&) const = default;
};

struct DateRange {
    CalendarDate start;
    CalendarDate end;

    /// Year-precision range, e.g. 1990:2000.
    static DateRange years(int from, int to);

    bool operator==(const DateRange&) const = default;
};

struct Term {
    std::string text;
    FieldTag tag = FieldTag::Untagged;

    bool operator==(const Term&) const = default;
};

struct OrGroup {
    std::vector<Term> terms;

    bool operator==(const OrGroup&) const = default;
};

using Clause = std::variant<Term, DateRange, OrGroup>;

/// Top-level AND sequence. OR only ever appears inside an OrGroup, so the
/// "no nested groups" invariants are carried by the types.
struct QueryExpr {
    std::vector<Clause> clauses;

    bool operator==(const QueryExpr&) const = default;
};

/// Ordering class used by normalization: MeSH first, then dates, then the rest.
enum class ClauseClass { Mesh = 0, Date = 1, Untagged = 2 };

ClauseClass classify(const Clause& c);

QueryExpr parse_query(std::string_view text);
std::string render_query(const QueryExpr& q);
std::string render_clause(const Clause& c);
std::string render_date(const DateRange& d);

/// Stable class ordering, duplicate elimination and singleton-OR collapse.
/// Idempotent.
QueryExpr normalize_query(const QueryExpr& q);

bool is_normalized(const QueryExpr& q);

/// Case-folded text of every MeSH-tagged term.
std::set<std::string> mesh_terms_of(const QueryExpr& q);

/// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> validate(const QueryExpr& q);

/// Number of Term leaves (inside OR groups too).
std::size_t term_count(const QueryExpr& q);

/// Replaces every date clause with `window`, appending it when absent, and
/// renormalizes. Returns true when the query changed.
bool enforce_date_window(QueryExpr& q, const DateRange& window);

/// One deterministic broadening step for an empty result: drop the last
/// untagged clause if there is one and something else remains, otherwise
/// demote the last MeSH clause to untagged. Nullopt when neither applies.
struct Broadening {
    QueryExpr query;
    std::string description;
};
std::optional<Broadening> broaden(const QueryExpr& q);

}  // namespace pmr::query
