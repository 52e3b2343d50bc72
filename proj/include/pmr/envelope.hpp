#pragma once

// Structured reply envelopes: locating the JSON object inside free-form model
// output and validating it against the schema a prompt asked for.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pmr::schema {

// Schema identifiers, one per prompt family.
inline constexpr std::string_view kMeshCandidates = "mesh_candidates";
inline constexpr std::string_view kMeshSelection = "mesh_selection";
inline constexpr std::string_view kQuery = "query";
inline constexpr std::string_view kCritique = "critique";
inline constexpr std::string_view kMeshUpdate = "mesh_update";
inline constexpr std::string_view kRefinedQuery = "refined_query";
inline constexpr std::string_view kFilter = "filter";
inline constexpr std::string_view kExtract = "extract";
inline constexpr std::string_view kReflection = "reflection";
inline constexpr std::string_view kSummary = "summary";
inline constexpr std::string_view kAnswer = "answer";
inline constexpr std::string_view kSelfReflection = "self_reflection";
inline constexpr std::string_view kJudge = "judge";

/// Judge dimensions in reporting order.
inline constexpr std::string_view kJudgeDimensions[] = {
    "Reasoning Soundness", "Evidence Grounding", "Clinical Relevance", "Trustworthiness"};

using Validator = std::function<nlohmann::json(const nlohmann::json&)>;

class Registry {
public:
    static const Registry& instance();

    bool has(std::string_view id) const;
    std::vector<std::string> ids() const;

    /// Validates and normalizes `value`; throws SchemaError.
    nlohmann::json validate(std::string_view id, const nlohmann::json& value) const;

    /// Example envelope quoted back to the model on a re-ask.
    const std::string& example(std::string_view id) const;

    /// Throws std::logic_error naming the first id without a validator.
    void require_all(const std::vector<std::string>& ids) const;

private:
    Registry();

    struct Entry {
        std::string id;
        Validator validator;
        std::string example;
    };
    std::vector<Entry> entries_;
};

/// First well-formed JSON object in `raw` (code fences stripped, trailing
/// commas tolerated).
std::optional<nlohmann::json> find_first_object(std::string_view raw);

/// Locates and validates the envelope for `schema_id`. Throws SchemaError.
nlohmann::json extract_envelope(std::string_view raw, std::string_view schema_id);

/// Accepts booleans and case-insensitive yes/no/true/false strings.
std::optional<bool> yes_no(const nlohmann::json& v);

}  // namespace pmr::schema
