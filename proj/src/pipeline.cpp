#include "qfs/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "qfs/error.hpp"
#include "qfs/metrics.hpp"

namespace qfs::pipeline {

using corpus::SnippetSpan;

std::vector<double> ConstantScorer::score(const corpus::QuestionRecord&, std::span<const Candidate> candidates) const
{
    return std::vector<double>(candidates.size(), value_);
}

std::vector<double> FunctionScorer::score(const corpus::QuestionRecord& question,
                                          std::span<const Candidate> candidates) const
{
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        out.push_back(fn_(question, c));
    }
    return out;
}

std::vector<double> OracleScorer::score(const corpus::QuestionRecord& question,
                                        std::span<const Candidate> candidates) const
{
    std::vector<double> out(candidates.size(), 0.0);
    if (question.ideal_answers.empty()) {
        return out;
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out[i] = metrics::best_reference_f1(candidates[i].span.text, question.ideal_answers);
    }
    return out;
}

nn::LabeledExample make_example(const corpus::QuestionRecord& question, const Candidate& candidate, int label)
{
    nn::LabeledExample ex;
    ex.question_id = question.id;
    ex.question_tokens = text::tokens(question.body);
    ex.sentence_tokens = text::tokens(candidate.span.text);
    ex.sentence_text = candidate.span.text;
    ex.position = candidate.position;
    ex.label = label;
    ex.pair_id = candidate.pair_id;
    return ex;
}

namespace {

std::vector<nn::LabeledExample> as_examples(const corpus::QuestionRecord& question,
                                            std::span<const Candidate> candidates)
{
    std::vector<nn::LabeledExample> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        out.push_back(make_example(question, c, 0));
    }
    return out;
}

}  // namespace

NncScorer::NncScorer(nn::NncParams params, std::shared_ptr<const embed::EmbeddingTable> table, std::size_t clip_len)
    : params_(std::move(params)), table_(std::move(table)), clip_len_(clip_len)
{
    if (!table_ || table_->dim() != params_.embed_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "word vectors do not match the model's input dimension");
    }
}

std::vector<double> NncScorer::score(const corpus::QuestionRecord& question,
                                     std::span<const Candidate> candidates) const
{
    auto examples = as_examples(question, candidates);
    auto samples = nn::make_nnc_samples(examples, *table_, clip_len_);
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(nn::nnc_forward(params_, s.question, s.sentence, s.position));
    }
    return out;
}

PooledScorer::PooledScorer(nn::PooledParams params, std::shared_ptr<const embed::PooledFeatures> features)
    : params_(std::move(params)), features_(std::move(features))
{
    if (!features_ || features_->dim != params_.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "pooled features do not match the model's input dimension");
    }
}

std::vector<double> PooledScorer::score(const corpus::QuestionRecord& question,
                                        std::span<const Candidate> candidates) const
{
    auto examples = as_examples(question, candidates);
    auto samples = nn::make_pooled_samples(examples, *features_);
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(nn::pooled_forward(params_, s.sentence, s.position));
    }
    return out;
}

std::vector<SnippetSpan> document_sentences(const corpus::DocumentRecord& doc)
{
    std::vector<SnippetSpan> out;
    for (const auto& section : doc.sections) {
        for (auto& s : text::split_sentences(section.text)) {
            out.push_back({doc.id, section.id, s.begin, s.end, std::move(s.text)});
        }
    }
    return out;
}

std::vector<Candidate> make_candidates(const corpus::QuestionRecord& question, std::span<const SnippetSpan> spans)
{
    std::vector<Candidate> out;
    out.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        out.push_back({spans[i], i, embed::make_pair_id(question.id, i)});
    }
    return out;
}

std::vector<std::size_t> top_in_occurrence_order(std::span<const double> scores, std::size_t per_doc)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(std::min(per_doc, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

namespace {

struct DocSentences {
    std::vector<std::vector<SnippetSpan>> per_doc;
    std::vector<SnippetSpan> flat;
};

DocSentences collect_sentences(std::span<const std::string> ranked_docs, const corpus::DocumentCollection& collection)
{
    DocSentences out;
    for (const auto& id : ranked_docs) {
        out.per_doc.push_back(document_sentences(collection.at(id)));
        out.flat.insert(out.flat.end(), out.per_doc.back().begin(), out.per_doc.back().end());
    }
    return out;
}

std::vector<SnippetSpan> select_per_document(const DocSentences& docs, std::span<const double> flat_scores,
                                             std::size_t per_doc)
{
    std::vector<SnippetSpan> out;
    std::size_t offset = 0;
    for (const auto& sentences : docs.per_doc) {
        auto scores = flat_scores.subspan(offset, sentences.size());
        for (auto i : top_in_occurrence_order(scores, per_doc)) {
            out.push_back(sentences[i]);
        }
        offset += sentences.size();
    }
    return out;
}

void check_per_doc(std::size_t per_doc)
{
    if (per_doc == 0) {
        throw Error(ErrorCode::InvalidArgument, "per_doc must be >= 1");
    }
}

}  // namespace

std::vector<SnippetSpan> snip_cosine(const corpus::QuestionRecord& question, std::span<const std::string> ranked_docs,
                                     const corpus::DocumentCollection& collection, std::size_t per_doc)
{
    check_per_doc(per_doc);
    auto docs = collect_sentences(ranked_docs, collection);
    if (docs.flat.empty()) {
        return {};
    }
    std::vector<std::vector<std::string>> token_lists;
    token_lists.reserve(docs.flat.size());
    for (const auto& s : docs.flat) {
        token_lists.push_back(text::tokens(s.text));
    }
    auto model = text::TfidfModel::fit(token_lists);
    auto qvec = model.vector(text::tokens(question.body));
    std::vector<double> scores;
    scores.reserve(token_lists.size());
    for (const auto& toks : token_lists) {
        scores.push_back(text::cosine(qvec, model.vector(toks)));
    }
    return select_per_document(docs, scores, per_doc);
}

std::vector<SnippetSpan> snip_model(const corpus::QuestionRecord& question, std::span<const std::string> ranked_docs,
                                    const corpus::DocumentCollection& collection, const SentenceScorer& scorer,
                                    std::size_t per_doc)
{
    check_per_doc(per_doc);
    auto docs = collect_sentences(ranked_docs, collection);
    if (docs.flat.empty()) {
        return {};
    }
    auto candidates = make_candidates(question, docs.flat);
    auto scores = scorer.score(question, candidates);
    if (scores.size() != candidates.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scorer returned the wrong number of scores");
    }
    return select_per_document(docs, scores, per_doc);
}

std::vector<SnippetSpan> gold_candidates(const corpus::QuestionRecord& question)
{
    std::vector<SnippetSpan> out;
    for (const auto& snippet : question.gold_snippets) {
        for (auto& s : text::split_sentences(snippet.text)) {
            out.push_back({snippet.doc_id, snippet.section_id, snippet.begin + s.begin, snippet.begin + s.end,
                           std::move(s.text)});
        }
    }
    return out;
}

std::vector<nn::LabeledExample> label_question(const corpus::QuestionRecord& question)
{
    if (question.ideal_answers.empty()) {
        throw Error(ErrorCode::NoIdealAnswer, "question " + question.id + " has no ideal answer");
    }
    auto spans = gold_candidates(question);
    if (spans.empty()) {
        throw Error(ErrorCode::NoCandidates, "question " + question.id + " has no gold snippet sentences");
    }
    auto candidates = make_candidates(question, spans);
    std::vector<double> scores = OracleScorer{}.score(question, candidates);
    auto positives = top_in_occurrence_order(scores, kPositiveLabels);
    std::vector<nn::LabeledExample> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        bool pos = std::binary_search(positives.begin(), positives.end(), i);
        out.push_back(make_example(question, candidates[i], pos ? 1 : 0));
    }
    return out;
}

std::vector<nn::LabeledExample> generate_labels(const corpus::QuestionSet& questions)
{
    std::vector<nn::LabeledExample> out;
    for (const auto& q : questions) {
        auto labels = label_question(q);
        out.insert(out.end(), std::make_move_iterator(labels.begin()), std::make_move_iterator(labels.end()));
    }
    return out;
}

std::vector<std::size_t> select_sentences(corpus::QuestionType type, std::span<const ScoredSentence> scored,
                                          const AnswerLengthTable& table)
{
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    auto by_occurrence = [&](std::size_t a, std::size_t b) {
        return scored[a].occurrence_index < scored[b].occurrence_index;
    };
    std::sort(order.begin(), order.end(), by_occurrence);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
    order.resize(std::min(table(type), order.size()));
    std::sort(order.begin(), order.end(), by_occurrence);
    return order;
}

std::string assemble_answer(corpus::QuestionType type, std::span<const ScoredSentence> scored,
                            const AnswerLengthTable& table)
{
    if (scored.empty()) {
        throw Error(ErrorCode::EmptyCandidateList, "no candidate sentences to assemble");
    }
    std::string out;
    for (auto i : select_sentences(type, scored, table)) {
        if (!out.empty()) {
            out += ' ';
        }
        out += scored[i].text;
    }
    return out;
}

namespace {

std::vector<ScoredSentence> score_spans(const corpus::QuestionRecord& question, std::span<const SnippetSpan> spans,
                                        const SentenceScorer& scorer)
{
    auto candidates = make_candidates(question, spans);
    auto scores = scorer.score(question, candidates);
    if (scores.size() != candidates.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scorer returned the wrong number of scores");
    }
    std::vector<ScoredSentence> out;
    out.reserve(spans.size());
    for (std::size_t i = 0; i < spans.size(); ++i) {
        out.push_back({spans[i].text, spans[i], i, scores[i]});
    }
    return out;
}

}  // namespace

std::string answer_from_spans(const corpus::QuestionRecord& question, std::span<const SnippetSpan> spans,
                              const SentenceScorer& scorer, const AnswerLengthTable& table)
{
    auto scored = score_spans(question, spans, scorer);
    return assemble_answer(question.type, scored, table);
}

namespace {

template <typename T>
const T& need(const T* ptr, const char* what)
{
    if (ptr == nullptr) {
        throw Error(ErrorCode::InvalidArgument, std::string("pipeline resource missing: ") + what);
    }
    return *ptr;
}

template <typename T>
void cap(std::vector<T>& items, std::size_t n)
{
    if (items.size() > n) {
        items.resize(n);
    }
}

}  // namespace

retrieval::RankedList retrieve(const corpus::QuestionRecord& question, const PipelineConfig& config,
                               const Resources& resources)
{
    const auto& index = need(resources.index, "index");
    auto toks = text::tokens(question.body);
    if (resources.stopwords != nullptr) {
        toks = text::remove_stopwords(std::move(toks), *resources.stopwords);
    }
    const auto& rc = config.retrieval;
    std::size_t k = rc.docs_for_round(config.round);
    if (rc.method == RetrievalMethod::Bm25) {
        return retrieval::bm25_search(index, toks, k);
    }
    const auto& dense = need(resources.dense, "dense document vectors");
    const auto& queries = need(resources.query_vectors, "query vectors");
    auto qvec = queries.find(question.id);
    if (!qvec) {
        throw Error(ErrorCode::ScorerInputMissing, "no query vector for question " + question.id);
    }
    if (rc.method == RetrievalMethod::Nir) {
        return retrieval::nir_search(index, dense, toks, *qvec, k, rc.lambda);
    }
    return retrieval::rerank_top(index, dense, toks, *qvec, k, rc.lambda, rc.pool_size);
}

std::vector<SnippetSpan> extract_snippets(const corpus::QuestionRecord& question, std::span<const std::string> docs,
                                          const PipelineConfig& config, const Resources& resources)
{
    const auto& collection = need(resources.documents, "documents");
    if (config.snippets.strategy == SnippetStrategy::Cosine) {
        return snip_cosine(question, docs, collection, config.snippets.per_doc);
    }
    return snip_model(question, docs, collection, need(resources.snippet_scorer, "snippet scorer"),
                      config.snippets.per_doc);
}

RetrievalStages run_retrieval_stages(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                     const Resources& resources)
{
    static const corpus::FeedbackStore no_feedback;
    const auto& feedback = resources.feedback != nullptr ? *resources.feedback : no_feedback;
    const auto& rc = config.retrieval;
    using corpus::FilterMode;

    auto ranked = retrieval::doc_ids(retrieve(question, config, resources));

    RetrievalStages out;
    out.documents = corpus::filter_judged(ranked, feedback, question.id, FilterMode::ExcludeAllJudged);
    cap(out.documents, rc.final_doc_cap);

    auto source_docs = corpus::filter_judged(ranked, feedback, question.id, FilterMode::ExcludeIrrelevantOnly);
    cap(source_docs, rc.final_doc_cap);
    auto snippets = extract_snippets(question, source_docs, config, resources);

    out.snippets = corpus::filter_judged(snippets, feedback, question.id, FilterMode::ExcludeAllJudged);
    cap(out.snippets, rc.final_snippet_cap);
    out.candidates =
        corpus::filter_judged(std::move(snippets), feedback, question.id, FilterMode::ExcludeIrrelevantOnly);
    return out;
}

AnswerTrace answer_question_traced(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                   const Resources& resources)
{
    auto stages = run_retrieval_stages(question, config, resources);
    AnswerTrace trace;
    trace.result.question_id = question.id;
    trace.result.documents = std::move(stages.documents);
    trace.result.snippets = std::move(stages.snippets);
    trace.candidates = score_spans(question, stages.candidates, need(resources.answer_scorer, "answer scorer"));
    trace.result.ideal_answer = assemble_answer(question.type, trace.candidates, config.answer_table);
    return trace;
}

corpus::AnswerResult answer_question(const corpus::QuestionRecord& question, const PipelineConfig& config,
                                     const Resources& resources)
{
    return answer_question_traced(question, config, resources).result;
}

}  // namespace qfs::pipeline
