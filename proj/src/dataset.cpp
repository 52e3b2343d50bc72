#include "pmr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "pmr/error.hpp"
#include "pmr/text.hpp"

namespace pmr::dataset {

using nlohmann::json;

namespace {

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw FormatError(0, std::string("missing string field '") + key + "'");
    auto s = std::string(text::trim(j[key].get<std::string>()));
    if (s.empty()) throw FormatError(0, std::string("empty field '") + key + "'");
    return s;
}

std::string record_id(const json& j) {
    if (j.contains("id") && j["id"].is_number_integer()) return std::to_string(j["id"].get<long long>());
    return required_string(j, "id");
}

query::CalendarDate parse_date(const std::string& s) {
    auto q = query::parse_query(s + ":" + s + "[pdat]");
    return std::get<query::DateRange>(q.clauses.at(0)).start;
}

}  // namespace

std::optional<Format> format_from_string(std::string_view s) {
    if (s == "pubmedqa" || s == "pubmedqa-style") return Format::PubmedQa;
    if (s == "mcq" || s == "mcq-style") return Format::Mcq;
    return std::nullopt;
}

query::DateRange parse_year_window(const json& j) {
    try {
        if (j.is_string()) {
            auto q = query::parse_query(std::string(text::trim(j.get<std::string>())) + "[pdat]");
            if (q.clauses.size() != 1 || !std::holds_alternative<query::DateRange>(q.clauses[0]))
                throw FormatError(0, "year_window is not a date range");
            return std::get<query::DateRange>(q.clauses[0]);
        }
        if (j.is_array() && j.size() == 2 && j[0].is_number_integer() && j[1].is_number_integer()) {
            auto r = query::DateRange::years(j[0].get<int>(), j[1].get<int>());
            if (r.end < r.start) throw FormatError(0, "year_window start is after its end");
            return r;
        }
        if (j.is_object()) {
            auto to_s = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
            query::DateRange r{parse_date(to_s(j.at("start"))), parse_date(to_s(j.at("end")))};
            if (r.start.has_day() != r.end.has_day()) throw FormatError(0, "mixed-precision year_window");
            if (r.end < r.start) throw FormatError(0, "year_window start is after its end");
            return r;
        }
    } catch (const SyntaxError& e) {
        throw FormatError(0, "bad year_window: " + e.detail());
    } catch (const json::exception& e) {
        throw FormatError(0, std::string("bad year_window: ") + e.what());
    }
    throw FormatError(0, "unsupported year_window " + j.dump());
}

QuestionSpec parse_record(const json& j, Format format) {
    if (!j.is_object()) throw FormatError(0, "record is not an object");
    QuestionSpec s;
    s.id = record_id(j);
    s.question = required_string(j, "question");

    if (j.contains("context") && !j["context"].is_null()) {
        const auto& c = j["context"];
        if (c.is_string()) {
            s.context = c.get<std::string>();
        } else if (c.is_array()) {
            std::vector<std::string> parts;
            for (const auto& p : c) {
                if (!p.is_string()) throw FormatError(0, "context entries must be strings");
                parts.push_back(p.get<std::string>());
            }
            s.context = text::join(parts, "\n");
        } else {
            throw FormatError(0, "context must be a string or a list of strings");
        }
    }

    if (format == Format::PubmedQa) {
        s.labels = {"yes", "no", "maybe"};
        s.task_spec = kYesNoMaybeInstruction;
    } else {
        if (!j.contains("options")) throw FormatError(0, "mcq record without options");
        const auto& opts = j["options"];
        std::vector<std::pair<std::string, std::string>> listed;
        if (opts.is_object()) {
            for (const auto& [k, v] : opts.items()) listed.emplace_back(k, v.get<std::string>());
        } else if (opts.is_array()) {
            for (std::size_t i = 0; i < opts.size(); ++i)
                listed.emplace_back(std::string(1, static_cast<char>('A' + i)), opts[i].get<std::string>());
        } else {
            throw FormatError(0, "options must be an object or a list");
        }
        if (listed.size() < 2) throw FormatError(0, "mcq record needs at least two options");
        for (const auto& [letter, textv] : listed) {
            s.labels.push_back(letter);
            s.question += "\n" + letter + ". " + textv;
        }
        s.task_spec = "Answer with exactly one option letter: " + text::join(s.labels, ", ") + ".";
    }
    if (j.contains("labels")) {
        s.labels = j["labels"].get<std::vector<std::string>>();
        if (s.labels.empty()) throw FormatError(0, "declared label set is empty");
    }
    if (j.contains("task_spec")) s.task_spec = required_string(j, "task_spec");

    if (j.contains("label") && !j["label"].is_null()) {
        auto label = required_string(j, "label");
        auto it = std::find_if(s.labels.begin(), s.labels.end(),
                               [&](const std::string& l) { return text::iequals(l, label); });
        if (it == s.labels.end())
            throw FormatError(0, "label '" + label + "' is not in the declared set {" + text::join(s.labels, ", ") + "}");
        s.gold_label = *it;
    }
    if (j.contains("year_window") && !j["year_window"].is_null()) s.date_window = parse_year_window(j["year_window"]);
    if (j.contains("gold_mesh") && !j["gold_mesh"].is_null()) {
        std::set<std::string> mesh;
        for (const auto& m : j["gold_mesh"]) mesh.insert(m.get<std::string>());
        s.gold_mesh = std::move(mesh);
    }
    return s;
}

std::vector<QuestionSpec> load_dataset(const std::filesystem::path& path, Format format) {
    std::ifstream in(path);
    if (!in) throw FormatError(0, "cannot open dataset " + path.string());
    std::vector<QuestionSpec> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            auto spec = parse_record(j, format);
            if (!ids.insert(spec.id).second) throw FormatError(0, "duplicate id '" + spec.id + "'");
            out.push_back(std::move(spec));
        } catch (const FormatError& e) {
            throw FormatError(lineno, e.reason());
        } catch (const json::exception& e) {
            throw FormatError(lineno, e.what());
        }
    }
    return out;
}

}  // namespace pmr::dataset
