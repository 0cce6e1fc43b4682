#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qfs/corpus.hpp"

namespace qfs::metrics {

/// Precision/recall/F1 triple; f1 = 2pr/(p+r), or 0 when p+r = 0.
struct Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static Score from_pr(double precision, double recall);
    bool operator==(const Score&) const = default;
};

/// A skip-bigram (first, second) or a unigram (first, "").
/// Tokens from text::tokens are never empty, so the encoding is unambiguous.
using Unit = std::pair<std::string, std::string>;
using UnitCounts = std::map<Unit, std::size_t>;

/// Unigrams plus ordered pairs (t_i, t_j), i < j, with j - i - 1 <= dskip.
UnitCounts su_units(std::span<const std::string> tokens, std::size_t dskip);

/// Clipped multiset overlap of su_units(., dskip).
Score rouge_su(std::span<const std::string> candidate, std::span<const std::string> reference,
               std::size_t dskip = 4);
Score rouge_su4_f1(std::string_view candidate, std::string_view reference);

Score rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t n);
Score rouge_n_f1(std::string_view candidate, std::string_view reference, std::size_t n);

/// max over references of rouge_su4_f1(candidate, ref).f1; throws EmptyReferenceList.
double best_reference_f1(std::string_view candidate, std::span<const std::string> references);

/// Set precision/recall over document ids; throws DuplicateInReturned.
Score document_f1(std::span<const std::string> returned, std::span<const std::string> gold);

/// Character-overlap F1. Spans are merged per (document, section) on each side
/// before counting, so overlapping returned spans are not double counted.
Score snippet_f1(std::span<const corpus::SnippetSpan> returned, std::span<const corpus::SnippetSpan> gold);

struct QuestionEval {
    std::string question_id;
    std::optional<Score> documents;  // absent when the gold has no documents
    std::optional<Score> snippets;   // absent when the gold has no snippets
    std::optional<double> ideal_su4; // absent when the gold has no ideal answer
};

struct EvalReport {
    std::vector<QuestionEval> questions;
    double document_f1 = 0.0;
    double snippet_f1 = 0.0;
    double ideal_su4_f1 = 0.0;
    std::size_t n_documents = 0;
    std::size_t n_snippets = 0;
    std::size_t n_ideal = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Macro averages over the gold questions; a question missing from the
/// submission scores zero on every facet its gold carries.
EvalReport evaluate(const corpus::QuestionSet& gold, std::span<const corpus::AnswerResult> submission);

}  // namespace qfs::metrics
