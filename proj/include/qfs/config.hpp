#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"
#include "qfs/corpus.hpp"

namespace qfs {

/// Number of extracted sentences per question type.
struct AnswerLengthTable {
    std::size_t summary = 6;
    std::size_t factoid = 2;
    std::size_t yesno = 2;
    std::size_t list = 3;

    std::size_t operator()(corpus::QuestionType type) const noexcept;
    bool operator==(const AnswerLengthTable&) const = default;
};

enum class RetrievalMethod { Bm25, Nir, Rerank };
enum class SnippetStrategy { Cosine, Model };
/// Sentence scorer used for snippets (strategy "model") and answers.
enum class ScorerKind { Nnc, Pooled, Constant };

struct RetrievalConfig {
    RetrievalMethod method = RetrievalMethod::Bm25;
    double lambda = 0.5;
    std::size_t pool_size = 200;
    /// Documents retrieved per round; rounds not listed use default_round_docs.
    std::map<int, std::size_t> round_docs{{1, 50}};
    std::size_t default_round_docs = 100;
    std::size_t final_doc_cap = 10;
    std::size_t final_snippet_cap = 10;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;

    std::size_t docs_for_round(int round) const;
    bool operator==(const RetrievalConfig&) const = default;
};

struct SnippetConfig {
    SnippetStrategy strategy = SnippetStrategy::Cosine;
    std::size_t per_doc = 3;

    bool operator==(const SnippetConfig&) const = default;
};

struct ModelConfig {
    ScorerKind kind = ScorerKind::Nnc;
    std::string params_path;
    /// Word vectors (nnc) or CEMB file for the answer-stage candidates (pooled).
    std::string embeddings_path;
    /// CEMB file for snippet-stage sentences (pooled + strategy "model" only).
    std::string snippet_embeddings_path;
    std::size_t clip_len = 300;

    bool operator==(const ModelConfig&) const = default;
};

struct DataConfig {
    std::string documents;
    std::string index;
    std::string dense;
    std::string query_vectors;
    std::string stopwords;

    bool operator==(const DataConfig&) const = default;
};

struct PipelineConfig {
    RetrievalConfig retrieval;
    SnippetConfig snippets;
    AnswerLengthTable answer_table;
    ModelConfig model;
    DataConfig data;
    int round = 1;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument / LambdaOutOfRange.
    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

std::string_view to_string(RetrievalMethod m);
std::string_view to_string(SnippetStrategy s);
std::string_view to_string(ScorerKind k);

/// Missing keys keep their defaults; unknown keys are ignored. Throws
/// MalformedInput for wrong types or unknown enum names, then validates.
PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::string& path);
nlohmann::json to_json(const PipelineConfig& config);

}  // namespace qfs
