#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pmr/llm.hpp"

namespace pmr::prompts {

/// One versioned prompt asset bound to the envelope schema it asks for.
/// `system` is sent verbatim; `user` carries the named placeholders.
struct PromptTemplate {
    std::string_view id;
    std::string_view version;
    std::string_view schema_id;
    std::string_view system;
    std::string_view user;
};

extern const PromptTemplate kMeshGeneration;
extern const PromptTemplate kMeshSelection;
extern const PromptTemplate kQueryGeneration;
extern const PromptTemplate kCritique;
extern const PromptTemplate kPoolUpdate;
extern const PromptTemplate kSelfCritic;
extern const PromptTemplate kCoarseFilter;
extern const PromptTemplate kEvidenceExtraction;
extern const PromptTemplate kReflectiveRetrieval;
extern const PromptTemplate kSummary;
extern const PromptTemplate kQuestionAnswering;
extern const PromptTemplate kSelfReflection;
extern const PromptTemplate kJudge;

const std::vector<const PromptTemplate*>& all();

/// Schema ids referenced by every registered template.
std::vector<std::string> schema_ids();

using Values = std::map<std::string, std::string, std::less<>>;

/// Fills the template into a system + user request. Missing optional
/// sections render as "None".
llm::ChatRequest build(const PromptTemplate& t, const Values& values, Stage stage,
                       double temperature);

/// Corrective block appended on a re-ask after an envelope failure.
std::string corrective(std::string_view schema_id, std::string_view problem);

}  // namespace pmr::prompts
