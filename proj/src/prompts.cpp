#include "pmr/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "pmr/envelope.hpp"
#include "pmr/text.hpp"

namespace pmr::prompts {

namespace {

// Shared by the query-drafting prompts.
#define PMR_QUERY_REQUIREMENTS                                                                    \
    "Requirements:\n"                                                                             \
    "\n"                                                                                          \
    "1. Use only the Boolean operator AND to connect terms.\n"                                    \
    "2. Field tag priority:\n"                                                                    \
    "   a. Place MeSH terms first and apply the [mesh] tag whenever possible.\n"                  \
    "   b. Place date ranges next, formatted as either YYYY:YYYY[pdat] or "                       \
    "YYYY/MM/DD:YYYY/MM/DD[pdat].\n"                                                              \
    "   c. Place all remaining terms last. Do not apply special field tags unless explicitly "    \
    "specified.\n"                                                                                \
    "3. Spacing: Separate each term and each AND with exactly one space.\n"                       \
    "4. Date range format:\n"                                                                     \
    "   YYYY:YYYY[pdat] or YYYY/MM/DD:YYYY/MM/DD[pdat]\n"

#define PMR_LOGICAL_OPERATORS                                                                     \
    "Logical operators:\n"                                                                        \
    "- Use AND to combine independent, parallel constraints.\n"                                   \
    "  Every term connected by AND must be satisfied.\n"                                          \
    "- Use OR only for similar or interchangeable concepts.\n"                                    \
    "  When using OR, you must enclose the entire OR-group in parentheses, e.g.:\n"               \
    "  (term1[mesh] OR term2[mesh]).\n"

}  // namespace

const PromptTemplate kMeshGeneration{
    "mesh_generation", "1", schema::kMeshCandidates,
    "You are an expert in biomedical indexing with Medical Subject Headings (MeSH).\n"
    "\n"
    "Your task is to propose a broad set of candidate MeSH terms that could be used to search "
    "PubMed for literature answering the question below.\n"
    "\n"
    "Requirements:\n"
    "1. Cover every biomedical concept in the question: conditions, interventions, exposures, "
    "populations, and outcomes.\n"
    "2. Use official MeSH heading names whenever possible.\n"
    "3. Give each candidate a brief rationale explaining its relevance to the question.\n"
    "4. Do not repeat a term.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"terms\": [\n"
    "    {\"term\": \"A candidate MeSH term.\", \"rationale\": \"Why the term is relevant.\"}\n"
    "  ]\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kMeshSelection{
    "mesh_selection", "1", schema::kMeshSelection,
    "You are an expert in biomedical indexing with Medical Subject Headings (MeSH).\n"
    "\n"
    "Your task is to select, from the candidate MeSH terms below, the subset that should be used "
    "to build the initial PubMed query. Select a term when you are confident in it, its rationale "
    "is plausible, and it is semantically aligned with the question.\n"
    "\n"
    "Requirements:\n"
    "1. Select only terms that appear in the candidate list, spelled exactly as listed.\n"
    "2. Select at least one term.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Candidate MeSH Terms:\n"
    "\n"
    "{candidates}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"selected\": [\"A selected MeSH term, exactly as listed.\"],\n"
    "  \"rationale\": \"A brief explanation of the selection.\"\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kQueryGeneration{
    "query_generation", "1", schema::kQuery,
    "You are an expert in PubMed search syntax.\n"
    "\n"
    "Your task is to convert the provided natural language description of the desired "
    "literature, together with any contextual information, into a single valid PubMed query "
    "string.\n"
    "\n" PMR_QUERY_REQUIREMENTS,
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"query\": \"The final PubMed query string as a single string.\",\n"
    "  \"rationale\": \"A brief explanation of term selection, field tags, ordering, use of AND, "
    "and how the context was incorporated.\"\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kCritique{
    "critique", "1", schema::kCritique,
    "You are a PubMed search critic.\n"
    "\n"
    "Your task is to evaluate every MeSH term of the current query against the titles and "
    "abstracts it retrieved. For each term, give a Yes/No verdict and a brief rationale on three "
    "dimensions:\n"
    "1. Coverage - Yes if the concept represented by the term appears in the retrieved records.\n"
    "2. Alignment - Yes if the articles associated with the term are relevant to the question.\n"
    "3. Redundancy - Yes if the term overlaps with, or is superfluous given, other terms in the "
    "current set or the logical composition (AND/OR) implied by the question. Include the "
    "recommended boolean linkage for the term as boolean_hint.\n"
    "\n"
    "Also report aggregate feedback signals. If no context is provided, return -1 for the "
    "corresponding signals.\n"
    "- coverage: 1 if the provided context sufficiently represents the concepts relevant to the "
    "question; 0 otherwise.\n"
    "- alignment: 1 if the provided context is relevant and appropriately focused on the "
    "question; 0 otherwise.\n"
    "- redundancy: 1 if there are no overlapping, unnecessary, or logically unintended terms; 0 "
    "otherwise.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Current Query:\n"
    "\n"
    "{search_query}\n"
    "\n"
    "Current MeSH Terms:\n"
    "\n"
    "{mesh_terms}\n"
    "\n"
    "Retrieved Records (title and abstract):\n"
    "\n"
    "{search_meta}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"terms\": [\n"
    "    {\"term\": \"MeSH term\",\n"
    "     \"coverage\": {\"verdict\": \"Yes | No\", \"rationale\": \"...\"},\n"
    "     \"alignment\": {\"verdict\": \"Yes | No\", \"rationale\": \"...\"},\n"
    "     \"redundancy\": {\"verdict\": \"Yes | No\", \"rationale\": \"...\", "
    "\"boolean_hint\": \"Recommended boolean linkage\"}}\n"
    "  ],\n"
    "  \"feedback\": {\n"
    "    \"coverage\": int, \"coverage_suggestion\": \"Suggested improvements\",\n"
    "    \"alignment\": int, \"alignment_suggestion\": \"Suggested improvements\",\n"
    "    \"redundancy\": int, \"redundancy_suggestion\": \"Suggested improvements\"\n"
    "  }\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kPoolUpdate{
    "pool_update", "1", schema::kMeshUpdate,
    "You are a PubMed search planning assistant.\n"
    "\n"
    "Your task is to revise the candidate MeSH term set using the critic feedback below. Favor "
    "terms that increase coverage without harming alignment. Prune or merge terms flagged as "
    "redundant. A term flagged both redundant and misaligned must be removed, merged into "
    "another term, or given a new rationale. Every term must carry a brief rationale.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Current MeSH Terms:\n"
    "\n"
    "{mesh_terms}\n"
    "\n"
    "Critic Feedback:\n"
    "\n"
    "{critique}\n"
    "\n"
    "Retrieved Records (title and abstract):\n"
    "\n"
    "{search_meta}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"terms\": [{\"term\": \"MeSH term\", \"rationale\": \"...\"}],\n"
    "  \"changes\": [{\"term\": \"MeSH term\", \"action\": \"removed | merged | rerationalized "
    "| added | kept\", \"into\": \"Target term when merged\"}]\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kSelfCritic{
    "self_critic", "1", schema::kRefinedQuery,
    "You are a PubMed search planning assistant.\n"
    "\n"
    "Your task is to produce one improved PubMed query for the next search step by:\n"
    "- Interpreting the natural-language question and any additional context.\n"
    "- Using search history to avoid ineffective or repetitive patterns.\n"
    "- Evolving the candidate term set using coverage, alignment, and redundancy feedback.\n"
    "- Ensuring the final query strictly follows the requirements.\n"
    "\n"
    "Feedback Signals:\n"
    "\n"
    "If no context is provided, return -1 for the corresponding signals. In producing the "
    "improved query, you must incorporate evolving feedback from:\n"
    "1. Coverage - 1 if the provided context sufficiently represents the concepts relevant to "
    "the question; 0 otherwise.\n"
    "2. Alignment - 1 if the provided context is relevant and appropriately focused on the "
    "question; 0 otherwise.\n"
    "3. Redundancy - 1 if there are no overlapping, unnecessary, or logically unintended terms; "
    "0 otherwise.\n"
    "\n" PMR_LOGICAL_OPERATORS "\n" PMR_QUERY_REQUIREMENTS,
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{search_meta}\n"
    "\n"
    "Search History (if any):\n"
    "\n"
    "{search_history}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"query\": \"The final PubMed query string as a single string.\",\n"
    "  \"rationale\": \"A brief explanation of term selection, field tags, ordering, use of "
    "logical operators, and how the context and feedback were incorporated.\",\n"
    "  \"feedback\": {\n"
    "    \"coverage\": int,\n"
    "    \"coverage_suggestion\": \"Suggested improvements\",\n"
    "    \"alignment\": int,\n"
    "    \"alignment_suggestion\": \"Suggested improvements\",\n"
    "    \"redundancy\": int,\n"
    "    \"redundancy_suggestion\": \"Suggested improvements\"\n"
    "  }\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kCoarseFilter{
    "coarse_filter", "1", schema::kFilter,
    "You are a biomedical literature screening assistant.\n"
    "\n"
    "Your task is to screen each retrieved record by its title and abstract and decide whether "
    "it is plausibly relevant to the question. Keep a record (Yes) when it may contain evidence "
    "that helps answer the question; drop it (No) otherwise. Give a short rationale for every "
    "record. Return one verdict per record, using its PMID.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Records:\n"
    "\n"
    "{records}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"verdicts\": [{\"pmid\": \"PMID\", \"keep\": \"Yes | No\", \"rationale\": \"...\"}]\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kEvidenceExtraction{
    "evidence_extraction", "1", schema::kExtract,
    "You are a biomedical evidence extraction assistant.\n"
    "\n"
    "Your task is to extract, from each article below, the passage that bears most directly on "
    "the question, and to judge whether that passage directly addresses the question (aligned: "
    "Yes) or not (aligned: No). Quote or closely paraphrase the article; do not add external "
    "content. Give a brief rationale for every verdict. Return one item per article, using its "
    "PMID.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Articles:\n"
    "\n"
    "{records}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"items\": [{\"pmid\": \"PMID\", \"passage\": \"Extracted passage\", "
    "\"aligned\": \"Yes | No\", \"rationale\": \"...\"}]\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kReflectiveRetrieval{
    "reflective_retrieval", "1", schema::kReflection,
    "You are a reflection assistant.\n"
    "\n"
    "Your task is to determine whether the provided search results with current context (if "
    "provided) contain enough relevant and specific information to answer the question.\n",
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Search Results:\n"
    "\n"
    "{search_results_str}\n"
    "\n"
    "Additional Context (if any):\n"
    "\n"
    "{context}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return your answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"is_sufficient\": true | false,\n"
    "  \"rationale\": \"Concise explanation of why the information is sufficient or "
    "insufficient.\",\n"
    "  \"needed_pmids\": [\"PMID1\", \"PMID2\", ...]\n"
    "    # PMIDs of additional relevant articles, if any\n"
    "}\n"
    "\n"
    "Do not include any explanation or text outside the JSON.\n"};

const PromptTemplate kSummary{
    "summary", "1", schema::kSummary,
    "You are a professional academic rewriting assistant.\n"
    "\n"
    "Your task is to transform the provided raw sources into a single, semantically coherent, "
    "and well-structured paragraph.\n"
    "\n"
    "Requirements:\n"
    "1. Use only the information from the provided raw sources, without adding external "
    "content.\n"
    "2. Preserve all original in-text citations exactly as they appear (e.g., [PMID: xxxx]).\n"
    "3. Ensure the paragraph is logically connected, concise, and scientifically rigorous.\n",
    "Raw Sources:\n"
    "\n"
    "{raw_sources}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"verified_sources\": \"The final rewritten paragraph as a single string.\",\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kQuestionAnswering{
    "question_answering", "1", schema::kAnswer,
    "You are an expert assistant.\n"
    "\n"
    "When sources are provided, you should primarily base your answer on the information in the "
    "sources. If the sources do not contain enough information to fully answer the question, "
    "you may supplement your answer using your own knowledge.\n"
    "\n"
    "Provide your answer and a clear rationale explaining how you arrived at it.\n",
    "Natural language question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Task instruction:\n"
    "\n"
    "{task_instruction}\n"
    "\n"
    "Additional context (if any):\n"
    "{context}\n"
    "\n"
    "Sources:\n"
    "{sources}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"answer\": \"Your answer according to the task instruction.\",\n"
    "  \"rationale\": \"A clear explanation of how you arrived at the answer.\"\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kSelfReflection{
    "self_reflection", "1", schema::kSelfReflection,
    "You are a self-reflection agent for evidence-grounded biomedical question answering.\n"
    "\n"
    "Your task is to identify conceptual gaps between the current answer and the verified "
    "sources, and to generate one revised PubMed query that targets missing or weakly supported "
    "concepts. When generating the revised query, you must avoid ineffective or repetitive "
    "search patterns by consulting the search history.\n"
    "\n"
    "A concept gap exists if one or more of the following conditions hold:\n"
    "- A key claim in the answer lacks direct support from the retrieved context.\n"
    "- The context only partially addresses the question.\n"
    "- The context is overly general and fails to capture critical biomedical specificity.\n"
    "\n" PMR_LOGICAL_OPERATORS "\n" PMR_QUERY_REQUIREMENTS,
    "Natural Language Question:\n"
    "\n"
    "{natural_language_question}\n"
    "\n"
    "Verified Sources:\n"
    "\n"
    "{verified_sources}\n"
    "\n"
    "Answer:\n"
    "\n"
    "{rationale_answer}\n"
    "\n"
    "Search History (if any):\n"
    "\n"
    "{search_history}\n"
    "\n"
    "Output:\n"
    "\n"
    "Return the answer strictly as JSON following this schema:\n"
    "\n"
    "{\n"
    "  \"query\": \"The final PubMed query string as a single string.\",\n"
    "  \"rationale\": \"A brief explanation describing the identified concept gaps and how the "
    "revised query addresses these gaps while following the query construction rules.\"\n"
    "}\n"
    "\n"
    "Do not add any explanation or additional text outside the JSON.\n"};

const PromptTemplate kJudge{
    "llm_judge", "1", schema::kJudge,
    "You are a neutral medical evaluator. Compare two answers from medical language models for a "
    "PubMedQA-style question. Judge *reasoning quality only* (not model identity).\n",
    "Question:\n"
    "{natural_language_question}\n"
    "\n"
    "Answer A:\n"
    "{answer_a}\n"
    "\n"
    "Answer B:\n"
    "{answer_b}\n"
    "\n"
    "Evaluate each answer independently on four dimensions (1-5):\n"
    "\n"
    "1) Reasoning Soundness - logical, coherent, internally consistent.\n"
    "\n"
    "2) Evidence Grounding - claims supported by biomedical evidence; no hallucinations.\n"
    "\n"
    "3) Clinical Relevance - directly addresses the question in an evidence-based manner.\n"
    "\n"
    "4) Trustworthiness - safe, conforms to biomedical knowledge; not misleading.\n"
    "\n"
    "Instructions:\n"
    "\n"
    "- Assign a numeric score (1-5) for each dimension to both A and B.\n"
    "\n"
    "- Give a brief justification (less than 2 sentences) for each score.\n"
    "\n"
    "- Provide an overall verdict based on reasoning quality: \"A\", \"B\", or \"tie\".\n"
    "\n"
    "- Do not mention model names or speculate on sources.\n"
    "\n"
    "- Output strictly valid JSON matching this schema (and nothing else):\n"
    "\n"
    "{\n"
    "  \"Answer A\": {\n"
    "    \"Reasoning Soundness\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Evidence Grounding\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Clinical Relevance\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Trustworthiness\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    }\n"
    "  },\n"
    "  \"Answer B\": {\n"
    "    \"Reasoning Soundness\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Evidence Grounding\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Clinical Relevance\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    },\n"
    "    \"Trustworthiness\": {\n"
    "      \"score\": <int>,\n"
    "      \"justification\": \"<string>\"\n"
    "    }\n"
    "  },\n"
    "  \"verdict\": \"A | B | tie\"\n"
    "}\n"};

#undef PMR_QUERY_REQUIREMENTS
#undef PMR_LOGICAL_OPERATORS

const std::vector<const PromptTemplate*>& all() {
    static const std::vector<const PromptTemplate*> templates{
        &kMeshGeneration, &kMeshSelection,      &kQueryGeneration,     &kCritique,
        &kPoolUpdate,     &kSelfCritic,         &kCoarseFilter,        &kEvidenceExtraction,
        &kReflectiveRetrieval, &kSummary,       &kQuestionAnswering,   &kSelfReflection,
        &kJudge};
    return templates;
}

std::vector<std::string> schema_ids() {
    std::set<std::string> ids;
    for (const auto* t : all()) ids.insert(std::string(t->schema_id));
    return {ids.begin(), ids.end()};
}

llm::ChatRequest build(const PromptTemplate& t, const Values& values, Stage stage,
                       double temperature) {
    Values filled = values;
    for (auto& [k, v] : filled)
        if (text::trim(v).empty()) v = "None";
    // Placeholders the caller did not supply render as "None" too.
    std::string_view u = t.user;
    for (auto open = u.find('{'); open != std::string_view::npos; open = u.find('{', open + 1)) {
        auto close = u.find('}', open + 1);
        if (close == std::string_view::npos) break;
        auto key = u.substr(open + 1, close - open - 1);
        bool ident = !key.empty() && std::all_of(key.begin(), key.end(), [](unsigned char c) {
            return std::islower(c) || c == '_';
        });
        if (ident && !filled.count(key)) filled.emplace(std::string(key), "None");
    }
    llm::ChatRequest req;
    req.blocks.push_back({llm::Role::System, std::string(t.system)});
    req.blocks.push_back({llm::Role::User, text::substitute(t.user, filled)});
    req.schema_id = std::string(t.schema_id);
    req.stage = stage;
    req.temperature = temperature;
    return req;
}

std::string corrective(std::string_view schema_id, std::string_view problem) {
    return "Your previous reply could not be used (" + std::string(problem) +
           "). Return the answer strictly as JSON following this schema:\n\n" +
           schema::Registry::instance().example(schema_id) +
           "\n\nDo not add any explanation or additional text outside the JSON.";
}

}  // namespace pmr::prompts
