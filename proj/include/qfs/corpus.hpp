#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace qfs::corpus {

enum class QuestionType { Summary, Factoid, YesNo, List };

std::string_view to_string(QuestionType type) noexcept;
/// Accepts "summary", "factoid", "yesno", "list"; throws UnknownQuestionType.
QuestionType parse_question_type(std::string_view name);

/// Identity of a snippet for feedback matching: exact offsets, no overlap logic.
struct SpanKey {
    std::string doc_id;
    std::string section_id;
    std::size_t begin = 0;
    std::size_t end = 0;

    auto operator<=>(const SpanKey&) const = default;
};

/// Character (code point) offsets into one document section, end exclusive.
struct SnippetSpan {
    std::string doc_id;
    std::string section_id;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string text;

    SpanKey key() const { return {doc_id, section_id, begin, end}; }
    std::size_t length() const noexcept { return end - begin; }
    bool operator==(const SnippetSpan&) const = default;
};

struct QuestionRecord {
    std::string id;
    std::string body;
    QuestionType type = QuestionType::Summary;
    std::vector<std::string> gold_documents;
    std::vector<SnippetSpan> gold_snippets;
    std::vector<std::string> ideal_answers;

    bool operator==(const QuestionRecord&) const = default;
};

class QuestionSet {
  public:
    QuestionSet() = default;
    /// Throws DuplicateId or MalformedInput (empty id).
    explicit QuestionSet(std::vector<QuestionRecord> questions);

    const std::vector<QuestionRecord>& questions() const noexcept { return questions_; }
    std::size_t size() const noexcept { return questions_.size(); }
    bool empty() const noexcept { return questions_.empty(); }
    const QuestionRecord& operator[](std::size_t i) const { return questions_[i]; }
    const QuestionRecord* find(std::string_view id) const;

    auto begin() const { return questions_.begin(); }
    auto end() const { return questions_.end(); }

    bool operator==(const QuestionSet& other) const { return questions_ == other.questions_; }

  private:
    std::vector<QuestionRecord> questions_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct Section {
    std::string id;
    std::string text;

    bool operator==(const Section&) const = default;
};

struct DocumentRecord {
    std::string id;
    std::vector<Section> sections;

    const Section* section(std::string_view section_id) const;
    bool operator==(const DocumentRecord&) const = default;
};

class DocumentCollection {
  public:
    DocumentCollection() = default;
    /// Throws DuplicateId for repeated document or section ids.
    explicit DocumentCollection(std::vector<DocumentRecord> docs);

    const std::vector<DocumentRecord>& documents() const noexcept { return docs_; }
    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }
    const DocumentRecord* find(std::string_view id) const;
    /// Throws UnknownDocument.
    const DocumentRecord& at(std::string_view id) const;

    auto begin() const { return docs_.begin(); }
    auto end() const { return docs_.end(); }

  private:
    std::vector<DocumentRecord> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Throws MalformedInput unless the span lies inside its section and its text
/// equals the section substring.
void validate_snippet(const SnippetSpan& span, const DocumentCollection& docs);

enum class Polarity { Relevant, Irrelevant };

class FeedbackStore {
  public:
    /// Throws MalformedInput when the same item is judged with both polarities.
    void judge_document(const std::string& question_id, const std::string& doc_id, Polarity p);
    void judge_snippet(const std::string& question_id, const SpanKey& span, Polarity p);

    std::optional<Polarity> polarity(std::string_view question_id, const std::string& doc_id) const;
    std::optional<Polarity> polarity(std::string_view question_id, const SpanKey& span) const;

    bool empty() const noexcept { return judged_.empty(); }

    struct Judgements {
        std::map<std::string, Polarity> documents;
        std::map<SpanKey, Polarity> snippets;
    };
    const std::map<std::string, Judgements, std::less<>>& judgements() const noexcept { return judged_; }

  private:
    std::map<std::string, Judgements, std::less<>> judged_;
};

enum class FilterMode { ExcludeAllJudged, ExcludeIrrelevantOnly };

inline const std::string& feedback_key(const std::string& doc_id) { return doc_id; }
inline SpanKey feedback_key(const SnippetSpan& span) { return span.key(); }

/// Drop judged items from a ranked candidate list, preserving the order of
/// the survivors. Items are anything with a feedback_key overload
/// (document ids, snippets) or a caller-supplied key projection.
template <typename T, typename KeyFn>
std::vector<T> filter_judged(std::vector<T> candidates, const FeedbackStore& feedback,
                             std::string_view question_id, FilterMode mode, KeyFn key)
{
    std::erase_if(candidates, [&](const T& item) {
        auto p = feedback.polarity(question_id, key(item));
        if (!p) {
            return false;
        }
        return mode == FilterMode::ExcludeAllJudged || *p == Polarity::Irrelevant;
    });
    return candidates;
}

template <typename T>
std::vector<T> filter_judged(std::vector<T> candidates, const FeedbackStore& feedback,
                             std::string_view question_id, FilterMode mode)
{
    return filter_judged(std::move(candidates), feedback, question_id, mode,
                         [](const T& item) -> decltype(auto) { return feedback_key(item); });
}

/// One question's system output: the batch submission record.
struct AnswerResult {
    std::string question_id;
    std::vector<std::string> documents;
    std::vector<SnippetSpan> snippets;
    std::string ideal_answer;

    bool operator==(const AnswerResult&) const = default;
};

// JSON exchange formats.
QuestionSet load_question_set(const std::string& path);
QuestionSet parse_question_set(const nlohmann::json& doc);
nlohmann::json to_json(const QuestionSet& questions);
void write_question_set(const std::string& path, const QuestionSet& questions);

nlohmann::json snippet_to_json(const SnippetSpan& span);
/// Accepts `section` or `beginSection` for the section id.
SnippetSpan snippet_from_json(const nlohmann::json& obj);

DocumentCollection load_document_collection(const std::string& path);
DocumentCollection parse_document_collection(std::string_view jsonl);
void write_document_collection(const std::string& path, const DocumentCollection& docs);

FeedbackStore load_feedback(const std::string& path);
FeedbackStore parse_feedback(const nlohmann::json& doc);
nlohmann::json to_json(const FeedbackStore& feedback);

/// BioASQ-style submission: {"questions": [{id, documents, snippets, ideal_answer}]}.
nlohmann::json to_submission_json(const std::vector<AnswerResult>& answers);
/// Also reads question-set files; an ideal_answer array contributes its first element.
std::vector<AnswerResult> parse_submission(const nlohmann::json& doc);
std::vector<AnswerResult> load_submission(const std::string& path);
void write_submission(const std::string& path, const std::vector<AnswerResult>& answers);

}  // namespace qfs::corpus
