#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qfs/config.hpp"
#include "qfs/corpus.hpp"
#include "qfs/embeddings.hpp"
#include "qfs/neural.hpp"
#include "qfs/retrieval.hpp"
#include "qfs/textproc.hpp"

namespace qfs::pipeline {

/// A sentence offered to a scorer. `position` feeds the model's position
/// feature; `pair_id` keys precomputed contextual embeddings.
struct Candidate {
    corpus::SnippetSpan span;
    std::size_t position = 0;
    std::string pair_id;
};

struct ScoredSentence {
    std::string text;
    corpus::SnippetSpan source;
    std::size_t occurrence_index = 0;
    double score = 0.0;
};

/// Scores all candidates of one question at once. Implementations must be
/// safe to call concurrently.
class SentenceScorer {
  public:
    virtual ~SentenceScorer() = default;
    virtual std::vector<double> score(const corpus::QuestionRecord& question,
                                      std::span<const Candidate> candidates) const = 0;
};

class ConstantScorer final : public SentenceScorer {
  public:
    explicit ConstantScorer(double value = 0.5) : value_(value) {}
    std::vector<double> score(const corpus::QuestionRecord&, std::span<const Candidate> candidates) const override;

  private:
    double value_;
};

class FunctionScorer final : public SentenceScorer {
  public:
    using Fn = std::function<double(const corpus::QuestionRecord&, const Candidate&)>;
    explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
    std::vector<double> score(const corpus::QuestionRecord& question,
                              std::span<const Candidate> candidates) const override;

  private:
    Fn fn_;
};

/// Best SU4-F1 of the candidate against the question's ideal answers.
class OracleScorer final : public SentenceScorer {
  public:
    std::vector<double> score(const corpus::QuestionRecord& question,
                              std::span<const Candidate> candidates) const override;
};

class NncScorer final : public SentenceScorer {
  public:
    NncScorer(nn::NncParams params, std::shared_ptr<const embed::EmbeddingTable> table, std::size_t clip_len);
    std::vector<double> score(const corpus::QuestionRecord& question,
                              std::span<const Candidate> candidates) const override;

  private:
    nn::NncParams params_;
    std::shared_ptr<const embed::EmbeddingTable> table_;
    std::size_t clip_len_;
};

/// Throws ScorerInputMissing for candidates without a pooled feature row.
class PooledScorer final : public SentenceScorer {
  public:
    PooledScorer(nn::PooledParams params, std::shared_ptr<const embed::PooledFeatures> features);
    std::vector<double> score(const corpus::QuestionRecord& question,
                              std::span<const Candidate> candidates) const override;

  private:
    nn::PooledParams params_;
    std::shared_ptr<const embed::PooledFeatures> features_;
};

/// Training example for one candidate of `question`.
nn::LabeledExample make_example(const corpus::QuestionRecord& question, const Candidate& candidate, int label);

/// Sentences of every section of `doc`, in reading order, with section offsets.
std::vector<corpus::SnippetSpan> document_sentences(const corpus::DocumentRecord& doc);

/// Candidates in list order: position = ordinal, pair id = question id + "#" + ordinal.
std::vector<Candidate> make_candidates(const corpus::QuestionRecord& question,
                                       std::span<const corpus::SnippetSpan> spans);

/// Keep the `per_doc` best of `scores` (ties to the earlier sentence), in
/// occurrence order. Returns indices into `scores`.
std::vector<std::size_t> top_in_occurrence_order(std::span<const double> scores, std::size_t per_doc);

/// Throws UnknownDocument.
std::vector<corpus::SnippetSpan> snip_cosine(const corpus::QuestionRecord& question,
                                             std::span<const std::string> ranked_docs,
                                             const corpus::DocumentCollection& collection, std::size_t per_doc = 3);

/// Scores every sentence of the ranked documents as one candidate list
/// (positions and pair ids run across documents in ranked order).
std::vector<corpus::SnippetSpan> snip_model(const corpus::QuestionRecord& question,
                                            std::span<const std::string> ranked_docs,
                                            const corpus::DocumentCollection& collection, const SentenceScorer& scorer,
                                            std::size_t per_doc = 3);

constexpr std::size_t kPositiveLabels = 5;

/// Sentences of the gold snippets in order; offsets are shifted by the snippet start.
std::vector<corpus::SnippetSpan> gold_candidates(const corpus::QuestionRecord& question);

/// Throws NoIdealAnswer / NoCandidates.
std::vector<nn::LabeledExample> label_question(const corpus::QuestionRecord& question);
std::vector<nn::LabeledExample> generate_labels(const corpus::QuestionSet& questions);

/// Indices of the selected sentences in occurrence order.
std::vector<std::size_t> select_sentences(corpus::QuestionType type, std::span<const ScoredSentence> scored,
                                          const AnswerLengthTable& table);
/// Throws EmptyCandidateList.
std::string assemble_answer(corpus::QuestionType type, std::span<const ScoredSentence> scored,
                            const AnswerLengthTable& table);

/// Score `spans` as one candidate list and assemble the answer.
std::string answer_from_spans(const corpus::QuestionRecord& question, std::span<const corpus::SnippetSpan> spans,
                              const SentenceScorer& scorer, const AnswerLengthTable& table);

/// Read-only inputs shared by all questions. Pointers may be null when the
/// configuration does not need them.
struct Resources {
    const corpus::DocumentCollection* documents = nullptr;
    const retrieval::InvertedIndex* index = nullptr;
    const retrieval::DenseStore* dense = nullptr;
    const retrieval::DenseStore* query_vectors = nullptr;
    const text::StopwordSet* stopwords = nullptr;
    const SentenceScorer* answer_scorer = nullptr;
    const SentenceScorer* snippet_scorer = nullptr;
    const corpus::FeedbackStore* feedback = nullptr;
};

/// Ranked document list for the question per the retrieval configuration.
retrieval::RankedList retrieve(const corpus::QuestionRecord& question, const PipelineConfig& config,
                               const Resources& resources);

/// Snippet strategy output over the given documents.
std::vector<corpus::SnippetSpan> extract_snippets(const corpus::QuestionRecord& question,
                                                  std::span<const std::string> docs, const PipelineConfig& config,
                                                  const Resources& resources);

/// Everything before answer scoring: returned documents and snippets (judged
/// items removed, capped) and the answer candidates (irrelevant items removed).
struct RetrievalStages {
    std::vector<std::string> documents;
    std::vector<corpus::SnippetSpan> snippets;
    std::vector<corpus::SnippetSpan> candidates;
};

RetrievalStages run_retrieval_stages(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                     const Resources& resources);

struct AnswerTrace {
    corpus::AnswerResult result;
    std::vector<ScoredSentence> candidates;
};

AnswerTrace answer_question_traced(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                   const Resources& resources);
corpus::AnswerResult answer_question(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                     const Resources& resources);

/// Builds a scorer from a fold's training examples.
using ScorerFactory =
    std::function<std::unique_ptr<SentenceScorer>(std::span<const nn::LabeledExample> training, std::size_t fold)>;

ScorerFactory constant_factory(double value = 0.5);
ScorerFactory oracle_factory();
/// Trains a fresh model per fold; the fold's training seed is derived from config.seed.
ScorerFactory nnc_factory(std::shared_ptr<const embed::EmbeddingTable> table, nn::TrainConfig config);
ScorerFactory pooled_factory(std::shared_ptr<const embed::PooledFeatures> features, nn::TrainConfig config);

/// Seeded shuffle of 0..n-1 cut into k folds whose sizes differ by at most one.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::string> test_ids;
    std::size_t n_train_examples = 0;
    std::size_t n_evaluated = 0;
    double mean_su4_f1 = 0.0;
};

struct CvReport {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<FoldResult> folds;
    std::vector<std::string> skipped;
    double mean_su4_f1 = 0.0;

    nlohmann::json to_json() const;
    std::string to_text() const;
};

struct CvOptions {
    std::size_t k = 10;
    std::uint64_t seed = 0;
    AnswerLengthTable table;
};

/// Questions without ideal answers or gold snippets stay in their fold but are
/// neither trained on nor scored. The overall mean is the mean of fold means.
/// Throws TooFewQuestions.
CvReport cross_validate(const corpus::QuestionSet& questions, const ScorerFactory& factory,
                        const CvOptions& options = {});

}  // namespace qfs::pipeline
