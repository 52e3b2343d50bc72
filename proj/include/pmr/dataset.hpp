#pragma once

// Benchmark datasets as line-delimited JSON.
//
// pubmedqa-style, one object per line:
//   {"id": "q1", "question": "...", "context": "..." | ["...", ...],
//    "label": "yes", "year_window": "1990:2000", "gold_mesh": ["Asthma", ...]}
// Declared labels default to yes/no/maybe; a record may override them with
// "labels": [...] and the instruction with "task_spec".
//
// mcq-style:
//   {"id": "m1", "question": "...", "options": {"A": "...", "B": "..."} | ["...", ...],
//    "label": "B"}
// Options are appended to the question text; the label set is the option letters.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmr/session.hpp"

namespace pmr::dataset {

enum class Format { PubmedQa, Mcq };

std::optional<Format> format_from_string(std::string_view s);

/// Throws FormatError{line, reason}.
std::vector<QuestionSpec> load_dataset(const std::filesystem::path& path, Format format);

QuestionSpec parse_record(const nlohmann::json& j, Format format);

/// "1990:2000", "1990/01/01:2000/12/31", [1990, 2000] or {"start": .., "end": ..}.
query::DateRange parse_year_window(const nlohmann::json& j);

}  // namespace pmr::dataset
