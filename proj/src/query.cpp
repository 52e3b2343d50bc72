#include "pmr/query.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <unordered_set>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::query {

namespace {

enum class TokKind { LParen, RParen, And, Or, Atom };

struct Token {
    TokKind kind;
    std::size_t pos;
    std::string text;                 // Atom only
    std::optional<std::string> tag;   // Atom only, raw tag contents
    std::size_t tag_pos = 0;
};

bool is_word_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != '[' &&
           c != ']';
}

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::optional<Token> atom;

    auto flush = [&] {
        if (atom) {
            out.push_back(std::move(*atom));
            atom.reset();
        }
    };

    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '(' || c == ')') {
            flush();
            out.push_back({c == '(' ? TokKind::LParen : TokKind::RParen, i, {}, {}, 0});
            ++i;
            continue;
        }
        if (c == ']') throw SyntaxError(i, "unbalanced ']'");
        if (c == '[') {
            if (!atom) throw SyntaxError(i, "field tag without a term");
            auto close = s.find(']', i + 1);
            if (close == std::string_view::npos) throw SyntaxError(i, "unterminated field tag");
            auto inner = s.substr(i + 1, close - i - 1);
            if (inner.find('[') != std::string_view::npos)
                throw SyntaxError(i, "nested '[' in field tag");
            atom->tag = std::string(text::trim(inner));
            atom->tag_pos = i;
            flush();
            i = close + 1;
            if (i < s.size() && s[i] != '(' && s[i] != ')' &&
                !std::isspace(static_cast<unsigned char>(s[i])))
                throw SyntaxError(i, "unexpected text after field tag");
            continue;
        }
        std::size_t start = i;
        while (i < s.size() && is_word_char(s[i])) ++i;
        auto word = s.substr(start, i - start);
        if (word == "AND" || word == "OR") {
            flush();
            out.push_back({word == "AND" ? TokKind::And : TokKind::Or, start, {}, {}, 0});
            continue;
        }
        if (!atom) {
            atom = Token{TokKind::Atom, start, std::string(word), {}, 0};
        } else {
            atom->text.push_back(' ');
            atom->text.append(word);
        }
    }
    flush();
    return out;
}

int parse_fixed_int(std::string_view s, std::size_t width) {
    if (s.size() != width || !text::all_digits(s)) return -1;
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

std::optional<CalendarDate> parse_calendar_date(std::string_view s) {
    if (s.size() == 4) {
        int y = parse_fixed_int(s, 4);
        if (y < 0) return std::nullopt;
        return CalendarDate{y, std::nullopt, std::nullopt};
    }
    if (s.size() == 10 && s[4] == '/' && s[7] == '/') {
        int y = parse_fixed_int(s.substr(0, 4), 4);
        int m = parse_fixed_int(s.substr(5, 2), 2);
        int d = parse_fixed_int(s.substr(8, 2), 2);
        if (y < 0 || m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) return std::nullopt;
        return CalendarDate{y, m, d};
    }
    return std::nullopt;
}

DateRange parse_date_range(std::string_view s, std::size_t pos) {
    auto colon = s.find(':');
    if (colon == std::string_view::npos || s.find(':', colon + 1) != std::string_view::npos)
        throw SyntaxError(pos, "date range must be START:END");
    auto start = parse_calendar_date(text::trim(s.substr(0, colon)));
    auto end = parse_calendar_date(text::trim(s.substr(colon + 1)));
    if (!start || !end) throw SyntaxError(pos, "malformed date in range '" + std::string(s) + "'");
    if (start->has_day() != end->has_day())
        throw SyntaxError(pos, "mixed-precision date range '" + std::string(s) + "'");
    if (*end < *start) throw SyntaxError(pos, "date range start after end");
    return DateRange{*start, *end};
}

Clause atom_to_clause(const Token& t) {
    if (!t.tag) return Term{t.text, FieldTag::Untagged};
    auto tag = text::lower(*t.tag);
    if (tag == "mesh") return Term{t.text, FieldTag::Mesh};
    if (tag == "pdat") return parse_date_range(t.text, t.pos);
    throw SyntaxError(t.tag_pos, "unknown field tag '[" + *t.tag + "]'");
}

class Parser {
public:
    Parser(std::vector<Token> toks, std::size_t end_pos) : toks_(std::move(toks)), end_(end_pos) {}

    QueryExpr parse() {
        QueryExpr q;
        q.clauses.push_back(clause());
        while (i_ < toks_.size()) {
            const auto& t = toks_[i_];
            if (t.kind == TokKind::Or) throw SyntaxError(t.pos, "OR outside parentheses");
            if (t.kind == TokKind::RParen) throw SyntaxError(t.pos, "unbalanced ')'");
            if (t.kind != TokKind::And) throw SyntaxError(t.pos, "missing operator between clauses");
            ++i_;
            if (i_ >= toks_.size()) throw SyntaxError(t.pos, "dangling operator 'AND'");
            q.clauses.push_back(clause());
        }
        return q;
    }

private:
    std::size_t pos_here() const { return i_ < toks_.size() ? toks_[i_].pos : end_; }

    Clause clause() {
        if (i_ >= toks_.size()) throw SyntaxError(end_, "expected a term");
        const auto& t = toks_[i_];
        switch (t.kind) {
            case TokKind::Atom:
                ++i_;
                return atom_to_clause(t);
            case TokKind::LParen:
                return group();
            case TokKind::RParen:
                throw SyntaxError(t.pos, "unbalanced ')'");
            case TokKind::And:
            case TokKind::Or:
                throw SyntaxError(t.pos, "dangling operator");
        }
        throw SyntaxError(t.pos, "unexpected token");
    }

    Term group_term() {
        if (i_ >= toks_.size()) throw SyntaxError(end_, "unbalanced '('");
        const auto& t = toks_[i_];
        if (t.kind == TokKind::LParen) throw SyntaxError(t.pos, "nested parentheses");
        if (t.kind == TokKind::RParen) throw SyntaxError(t.pos, "empty group");
        if (t.kind != TokKind::Atom) throw SyntaxError(t.pos, "dangling operator");
        ++i_;
        auto c = atom_to_clause(t);
        if (!std::holds_alternative<Term>(c)) throw SyntaxError(t.pos, "date range inside OR group");
        return std::get<Term>(std::move(c));
    }

    Clause group() {
        std::size_t open = toks_[i_].pos;
        ++i_;
        OrGroup g;
        g.terms.push_back(group_term());
        while (true) {
            if (i_ >= toks_.size()) throw SyntaxError(open, "unbalanced '('");
            const auto& t = toks_[i_];
            if (t.kind == TokKind::RParen) {
                ++i_;
                return g;
            }
            if (t.kind == TokKind::And) throw SyntaxError(t.pos, "AND inside parentheses");
            if (t.kind != TokKind::Or) throw SyntaxError(pos_here(), "missing operator in group");
            ++i_;
            g.terms.push_back(group_term());
        }
    }

    std::vector<Token> toks_;
    std::size_t end_;
    std::size_t i_ = 0;
};

std::string pad(int v, int width) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%0*d", width, v);
    return buf;
}

std::string render_calendar(const CalendarDate& d) {
    if (!d.has_day()) return pad(d.year, 4);
    return pad(d.year, 4) + "/" + pad(*d.month, 2) + "/" + pad(*d.day, 2);
}

std::string render_term(const Term& t) {
    return t.tag == FieldTag::Mesh ? t.text + "[mesh]" : t.text;
}

std::string dedup_key(const Clause& c) { return text::lower(render_clause(c)); }

bool term_text_valid(const std::string& s, std::string* why) {
    if (s.empty()) {
        *why = "empty term text";
        return false;
    }
    if (s.find_first_of("()[]") != std::string::npos) {
        *why = "term text contains a reserved character: " + s;
        return false;
    }
    if (text::squeeze(s) != s) {
        *why = "term text has irregular whitespace: '" + s + "'";
        return false;
    }
    std::size_t start = 0;
    while (start <= s.size()) {
        auto sp = s.find(' ', start);
        auto word = s.substr(start, sp == std::string::npos ? std::string::npos : sp - start);
        if (word == "AND" || word == "OR") {
            *why = "term text contains an operator word: " + s;
            return false;
        }
        if (sp == std::string::npos) break;
        start = sp + 1;
    }
    return true;
}

}  // namespace

DateRange DateRange::years(int from, int to) {
    return DateRange{CalendarDate{from, std::nullopt, std::nullopt},
                     CalendarDate{to, std::nullopt, std::nullopt}};
}

ClauseClass classify(const Clause& c) {
    if (std::holds_alternative<DateRange>(c)) return ClauseClass::Date;
    if (const auto* t = std::get_if<Term>(&c))
        return t->tag == FieldTag::Mesh ? ClauseClass::Mesh : ClauseClass::Untagged;
    const auto& g = std::get<OrGroup>(c);
    bool all_mesh = !g.terms.empty() && std::all_of(g.terms.begin(), g.terms.end(), [](const Term& t) {
        return t.tag == FieldTag::Mesh;
    });
    return all_mesh ? ClauseClass::Mesh : ClauseClass::Untagged;
}

QueryExpr parse_query(std::string_view input) {
    auto trimmed = text::trim(input);
    if (trimmed.empty()) throw SyntaxError(0, "empty query");
    return Parser(lex(input), input.size()).parse();
}

std::string render_date(const DateRange& d) {
    return render_calendar(d.start) + ":" + render_calendar(d.end) + "[pdat]";
}

std::string render_clause(const Clause& c) {
    if (const auto* t = std::get_if<Term>(&c)) return render_term(*t);
    if (const auto* d = std::get_if<DateRange>(&c)) return render_date(*d);
    const auto& g = std::get<OrGroup>(c);
    std::vector<std::string> parts;
    parts.reserve(g.terms.size());
    for (const auto& t : g.terms) parts.push_back(render_term(t));
    return "(" + text::join(parts, " OR ") + ")";
}

std::string render_query(const QueryExpr& q) {
    std::vector<std::string> parts;
    parts.reserve(q.clauses.size());
    for (const auto& c : q.clauses) parts.push_back(render_clause(c));
    return text::join(parts, " AND ");
}

QueryExpr normalize_query(const QueryExpr& q) {
    std::vector<Clause> collapsed;
    collapsed.reserve(q.clauses.size());
    for (const auto& c : q.clauses) {
        if (const auto* g = std::get_if<OrGroup>(&c)) {
            OrGroup dedup;
            std::unordered_set<std::string> seen;
            for (const auto& t : g->terms)
                if (seen.insert(text::lower(render_term(t))).second) dedup.terms.push_back(t);
            if (dedup.terms.size() == 1)
                collapsed.emplace_back(std::move(dedup.terms.front()));
            else
                collapsed.emplace_back(std::move(dedup));
        } else {
            collapsed.push_back(c);
        }
    }

    QueryExpr out;
    std::unordered_set<std::string> seen;
    for (auto& c : collapsed)
        if (seen.insert(dedup_key(c)).second) out.clauses.push_back(std::move(c));

    std::stable_sort(out.clauses.begin(), out.clauses.end(), [](const Clause& a, const Clause& b) {
        return classify(a) < classify(b);
    });
    return out;
}

bool is_normalized(const QueryExpr& q) { return normalize_query(q) == q; }

std::set<std::string> mesh_terms_of(const QueryExpr& q) {
    std::set<std::string> out;
    auto add = [&](const Term& t) {
        if (t.tag == FieldTag::Mesh) out.insert(text::lower(t.text));
    };
    for (const auto& c : q.clauses) {
        if (const auto* t = std::get_if<Term>(&c)) add(*t);
        if (const auto* g = std::get_if<OrGroup>(&c))
            for (const auto& t : g->terms) add(t);
    }
    return out;
}

std::size_t term_count(const QueryExpr& q) {
    std::size_t n = 0;
    for (const auto& c : q.clauses) {
        if (std::holds_alternative<Term>(c)) ++n;
        if (const auto* g = std::get_if<OrGroup>(&c)) n += g->terms.size();
    }
    return n;
}

std::optional<std::string> validate(const QueryExpr& q) {
    if (q.clauses.empty()) return "empty AND sequence";
    std::string why;
    auto check_term = [&](const Term& t) {
        if (t.tag == FieldTag::PubDate) {
            why = "plain term carries [pdat]: " + t.text;
            return false;
        }
        return term_text_valid(t.text, &why);
    };
    for (const auto& c : q.clauses) {
        if (const auto* t = std::get_if<Term>(&c)) {
            if (!check_term(*t)) return why;
        } else if (const auto* g = std::get_if<OrGroup>(&c)) {
            if (g->terms.size() < 2) return "OR group with fewer than two terms";
            for (const auto& t : g->terms)
                if (!check_term(t)) return why;
        } else {
            const auto& d = std::get<DateRange>(c);
            if (d.start.has_day() != d.end.has_day()) return "mixed-precision date range";
            if (d.end < d.start) return "date range start after end";
            for (const auto* cd : {&d.start, &d.end}) {
                if (cd->year < 0 || cd->year > 9999) return "year out of range";
                if (cd->month.has_value() != cd->day.has_value()) return "partial date";
                if (cd->has_day() && (*cd->month < 1 || *cd->month > 12 || *cd->day < 1 ||
                                      *cd->day > days_in_month(cd->year, *cd->month)))
                    return "invalid calendar date";
            }
        }
    }
    return std::nullopt;
}

bool enforce_date_window(QueryExpr& q, const DateRange& window) {
    QueryExpr out;
    for (const auto& c : q.clauses)
        if (!std::holds_alternative<DateRange>(c)) out.clauses.push_back(c);
    out.clauses.emplace_back(window);
    out = normalize_query(out);
    bool changed = !(out == q);
    q = std::move(out);
    return changed;
}

std::optional<Broadening> broaden(const QueryExpr& q) {
    std::optional<std::size_t> last_untagged, last_mesh;
    std::size_t non_date = 0;
    for (std::size_t i = 0; i < q.clauses.size(); ++i) {
        switch (classify(q.clauses[i])) {
            case ClauseClass::Untagged:
                last_untagged = i;
                ++non_date;
                break;
            case ClauseClass::Mesh:
                last_mesh = i;
                ++non_date;
                break;
            case ClauseClass::Date:
                break;
        }
    }

    if (last_untagged && non_date >= 2) {
        QueryExpr out = q;
        auto dropped = render_clause(out.clauses[*last_untagged]);
        out.clauses.erase(out.clauses.begin() + static_cast<std::ptrdiff_t>(*last_untagged));
        return Broadening{normalize_query(out), "dropped untagged clause " + dropped};
    }
    if (last_mesh) {
        QueryExpr out = q;
        auto& c = out.clauses[*last_mesh];
        auto before = render_clause(c);
        if (auto* t = std::get_if<Term>(&c)) {
            t->tag = FieldTag::Untagged;
        } else {
            for (auto& t : std::get<OrGroup>(c).terms) t.tag = FieldTag::Untagged;
        }
        auto after = render_clause(c);
        return Broadening{normalize_query(out), "relaxed " + before + " to " + after};
    }
    return std::nullopt;
}

}  // namespace pmr::query
