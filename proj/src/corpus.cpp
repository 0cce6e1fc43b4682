#include "qfs/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "qfs/binary_io.hpp"
#include "qfs/error.hpp"
#include "qfs/log.hpp"
#include "qfs/textproc.hpp"

namespace qfs::corpus {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedInput, what); }

const json& require(const json& obj, std::string_view key, std::string_view context)
{
    if (!obj.is_object()) {
        malformed(std::string(context) + ": expected an object");
    }
    auto it = obj.find(key);
    if (it == obj.end()) {
        malformed(std::string(context) + ": missing field '" + std::string(key) + "'");
    }
    return *it;
}

std::string require_string(const json& obj, std::string_view key, std::string_view context)
{
    const auto& v = require(obj, key, context);
    if (!v.is_string()) {
        malformed(std::string(context) + ": field '" + std::string(key) + "' must be a string");
    }
    return v.get<std::string>();
}

std::size_t require_offset(const json& obj, std::string_view key, std::string_view context)
{
    const auto& v = require(obj, key, context);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        malformed(std::string(context) + ": field '" + std::string(key) + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<std::string> string_list(const json& obj, std::string_view key, std::string_view context)
{
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return out;
    }
    if (it->is_string()) {
        out.push_back(it->get<std::string>());
        return out;
    }
    if (!it->is_array()) {
        malformed(std::string(context) + ": field '" + std::string(key) + "' must be an array of strings");
    }
    for (const auto& v : *it) {
        if (!v.is_string()) {
            malformed(std::string(context) + ": field '" + std::string(key) + "' must be an array of strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

json parse_json_text(std::string_view text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        malformed(source + ": " + e.what());
    }
}

Polarity parse_polarity(const json& item, std::string_view context)
{
    auto p = require_string(item, "polarity", context);
    if (p == "relevant") {
        return Polarity::Relevant;
    }
    if (p == "irrelevant") {
        return Polarity::Irrelevant;
    }
    malformed(std::string(context) + ": unknown polarity '" + p + "'");
}

}  // namespace

std::string_view to_string(QuestionType type) noexcept
{
    switch (type) {
    case QuestionType::Summary: return "summary";
    case QuestionType::Factoid: return "factoid";
    case QuestionType::YesNo: return "yesno";
    case QuestionType::List: return "list";
    }
    return "summary";
}

QuestionType parse_question_type(std::string_view name)
{
    if (name == "summary") {
        return QuestionType::Summary;
    }
    if (name == "factoid") {
        return QuestionType::Factoid;
    }
    if (name == "yesno") {
        return QuestionType::YesNo;
    }
    if (name == "list") {
        return QuestionType::List;
    }
    throw Error(ErrorCode::UnknownQuestionType, "unknown question type '" + std::string(name) + "'");
}

QuestionSet::QuestionSet(std::vector<QuestionRecord> questions) : questions_(std::move(questions))
{
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        const auto& id = questions_[i].id;
        if (id.empty()) {
            malformed("question at index " + std::to_string(i) + " has an empty id");
        }
        if (!by_id_.emplace(id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate question id '" + id + "'");
        }
    }
}

const QuestionRecord* QuestionSet::find(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &questions_[it->second];
}

const Section* DocumentRecord::section(std::string_view section_id) const
{
    for (const auto& s : sections) {
        if (s.id == section_id) {
            return &s;
        }
    }
    return nullptr;
}

DocumentCollection::DocumentCollection(std::vector<DocumentRecord> docs) : docs_(std::move(docs))
{
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& d = docs_[i];
        if (d.id.empty()) {
            malformed("document at index " + std::to_string(i) + " has an empty id");
        }
        if (!by_id_.emplace(d.id, i).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate document id '" + d.id + "'");
        }
        std::unordered_set<std::string_view> section_ids;
        for (const auto& s : d.sections) {
            if (!section_ids.insert(s.id).second) {
                throw Error(ErrorCode::DuplicateId, "duplicate section id '" + s.id + "' in document '" + d.id + "'");
            }
        }
    }
}

const DocumentRecord* DocumentCollection::find(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const DocumentRecord& DocumentCollection::at(std::string_view id) const
{
    const auto* d = find(id);
    if (d == nullptr) {
        throw Error(ErrorCode::UnknownDocument, "document '" + std::string(id) + "' not in collection");
    }
    return *d;
}

void validate_snippet(const SnippetSpan& span, const DocumentCollection& docs)
{
    const auto* doc = docs.find(span.doc_id);
    if (doc == nullptr) {
        malformed("snippet references unknown document '" + span.doc_id + "'");
    }
    const auto* sec = doc->section(span.section_id);
    if (sec == nullptr) {
        malformed("snippet references unknown section '" + span.section_id + "' of '" + span.doc_id + "'");
    }
    if (span.begin >= span.end || span.end > text::char_length(sec->text)) {
        malformed("snippet offsets out of range in '" + span.doc_id + "'");
    }
    if (text::substr_chars(sec->text, span.begin, span.end) != span.text) {
        malformed("snippet text does not match section substring in '" + span.doc_id + "'");
    }
}

void FeedbackStore::judge_document(const std::string& question_id, const std::string& doc_id, Polarity p)
{
    auto [it, inserted] = judged_[question_id].documents.emplace(doc_id, p);
    if (!inserted && it->second != p) {
        malformed("document '" + doc_id + "' judged with both polarities for question '" + question_id + "'");
    }
}

void FeedbackStore::judge_snippet(const std::string& question_id, const SpanKey& span, Polarity p)
{
    auto [it, inserted] = judged_[question_id].snippets.emplace(span, p);
    if (!inserted && it->second != p) {
        malformed("snippet in '" + span.doc_id + "' judged with both polarities for question '" + question_id + "'");
    }
}

std::optional<Polarity> FeedbackStore::polarity(std::string_view question_id, const std::string& doc_id) const
{
    auto q = judged_.find(question_id);
    if (q == judged_.end()) {
        return std::nullopt;
    }
    auto it = q->second.documents.find(doc_id);
    if (it == q->second.documents.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<Polarity> FeedbackStore::polarity(std::string_view question_id, const SpanKey& span) const
{
    auto q = judged_.find(question_id);
    if (q == judged_.end()) {
        return std::nullopt;
    }
    auto it = q->second.snippets.find(span);
    if (it == q->second.snippets.end()) {
        return std::nullopt;
    }
    return it->second;
}

json snippet_to_json(const SnippetSpan& span)
{
    return json{{"document", span.doc_id},
                {"section", span.section_id},
                {"offsetInBeginSection", span.begin},
                {"offsetInEndSection", span.end},
                {"text", span.text}};
}

SnippetSpan snippet_from_json(const json& obj)
{
    constexpr std::string_view ctx = "snippet";
    SnippetSpan span;
    span.doc_id = require_string(obj, "document", ctx);
    if (obj.contains("section")) {
        span.section_id = require_string(obj, "section", ctx);
    } else {
        span.section_id = require_string(obj, "beginSection", ctx);
    }
    span.begin = require_offset(obj, "offsetInBeginSection", ctx);
    span.end = require_offset(obj, "offsetInEndSection", ctx);
    if (obj.contains("text")) {
        span.text = require_string(obj, "text", ctx);
    }
    if (span.begin >= span.end) {
        malformed("snippet in '" + span.doc_id + "' has begin >= end");
    }
    return span;
}

QuestionSet parse_question_set(const json& doc)
{
    const json* arr = &doc;
    if (doc.is_object() && doc.contains("questions")) {
        arr = &doc["questions"];
    }
    if (!arr->is_array()) {
        malformed("question set must be a JSON array");
    }
    std::vector<QuestionRecord> out;
    out.reserve(arr->size());
    for (const auto& q : *arr) {
        QuestionRecord rec;
        rec.id = require_string(q, "id", "question");
        const std::string ctx = "question '" + rec.id + "'";
        rec.body = require_string(q, "body", ctx);
        rec.type = parse_question_type(require_string(q, "type", ctx));
        rec.gold_documents = string_list(q, "documents", ctx);
        if (auto it = q.find("snippets"); it != q.end() && !it->is_null()) {
            if (!it->is_array()) {
                malformed(ctx + ": snippets must be an array");
            }
            for (const auto& s : *it) {
                auto span = snippet_from_json(s);
                if (text::char_length(span.text) != span.length()) {
                    malformed(ctx + ": snippet text length disagrees with its offsets");
                }
                rec.gold_snippets.push_back(std::move(span));
            }
        }
        rec.ideal_answers = string_list(q, "ideal_answer", ctx);
        out.push_back(std::move(rec));
    }
    return QuestionSet(std::move(out));
}

QuestionSet load_question_set(const std::string& path)
{
    return parse_question_set(parse_json_text(io::read_file(path), path));
}

json to_json(const QuestionSet& questions)
{
    json arr = json::array();
    for (const auto& q : questions) {
        json snippets = json::array();
        for (const auto& s : q.gold_snippets) {
            snippets.push_back(snippet_to_json(s));
        }
        arr.push_back({{"id", q.id},
                       {"body", q.body},
                       {"type", to_string(q.type)},
                       {"documents", q.gold_documents},
                       {"snippets", snippets},
                       {"ideal_answer", q.ideal_answers}});
    }
    return arr;
}

void write_question_set(const std::string& path, const QuestionSet& questions)
{
    io::write_file(path, to_json(questions).dump(2) + "\n");
}

DocumentCollection parse_document_collection(std::string_view jsonl)
{
    std::vector<DocumentRecord> docs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        auto nl = jsonl.find('\n', pos);
        auto line = jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            continue;
        }
        const std::string where = "documents line " + std::to_string(line_no);
        auto obj = parse_json_text(line, where);
        DocumentRecord doc;
        doc.id = require_string(obj, "id", where);
        const auto& sections = require(obj, "sections", where);
        if (!sections.is_array()) {
            malformed(where + ": sections must be an array");
        }
        for (const auto& s : sections) {
            doc.sections.push_back({require_string(s, "id", where), require_string(s, "text", where)});
        }
        docs.push_back(std::move(doc));
    }
    return DocumentCollection(std::move(docs));
}

DocumentCollection load_document_collection(const std::string& path)
{
    auto docs = parse_document_collection(io::read_file(path));
    spdlog::debug("loaded {} documents from {}", docs.size(), path);
    return docs;
}

void write_document_collection(const std::string& path, const DocumentCollection& docs)
{
    std::string out;
    for (const auto& d : docs) {
        json sections = json::array();
        for (const auto& s : d.sections) {
            sections.push_back({{"id", s.id}, {"text", s.text}});
        }
        out += json{{"id", d.id}, {"sections", sections}}.dump();
        out += '\n';
    }
    io::write_file(path, out);
}

FeedbackStore parse_feedback(const json& doc)
{
    if (!doc.is_array()) {
        malformed("feedback must be a JSON array");
    }
    FeedbackStore store;
    for (const auto& entry : doc) {
        auto qid = require_string(entry, "question_id", "feedback");
        const std::string ctx = "feedback for '" + qid + "'";
        const auto& items = require(entry, "items", ctx);
        if (!items.is_array()) {
            malformed(ctx + ": items must be an array");
        }
        for (const auto& item : items) {
            auto kind = require_string(item, "kind", ctx);
            auto polarity = parse_polarity(item, ctx);
            const auto& ref = require(item, "ref", ctx);
            if (kind == "document") {
                if (!ref.is_string()) {
                    malformed(ctx + ": document ref must be a string");
                }
                store.judge_document(qid, ref.get<std::string>(), polarity);
            } else if (kind == "snippet") {
                store.judge_snippet(qid, snippet_from_json(ref).key(), polarity);
            } else {
                malformed(ctx + ": unknown item kind '" + kind + "'");
            }
        }
    }
    return store;
}

FeedbackStore load_feedback(const std::string& path)
{
    return parse_feedback(parse_json_text(io::read_file(path), path));
}

json to_json(const FeedbackStore& feedback)
{
    auto pol = [](Polarity p) { return p == Polarity::Relevant ? "relevant" : "irrelevant"; };
    json arr = json::array();
    for (const auto& [qid, j] : feedback.judgements()) {
        json items = json::array();
        for (const auto& [doc, p] : j.documents) {
            items.push_back({{"kind", "document"}, {"ref", doc}, {"polarity", pol(p)}});
        }
        for (const auto& [key, p] : j.snippets) {
            json ref{{"document", key.doc_id},
                     {"section", key.section_id},
                     {"offsetInBeginSection", key.begin},
                     {"offsetInEndSection", key.end}};
            items.push_back({{"kind", "snippet"}, {"ref", ref}, {"polarity", pol(p)}});
        }
        arr.push_back({{"question_id", qid}, {"items", items}});
    }
    return arr;
}

json to_submission_json(const std::vector<AnswerResult>& answers)
{
    json arr = json::array();
    for (const auto& a : answers) {
        json snippets = json::array();
        for (const auto& s : a.snippets) {
            snippets.push_back(snippet_to_json(s));
        }
        arr.push_back({{"id", a.question_id},
                       {"documents", a.documents},
                       {"snippets", snippets},
                       {"ideal_answer", a.ideal_answer}});
    }
    return json{{"questions", arr}};
}

std::vector<AnswerResult> parse_submission(const json& doc)
{
    const json* arr = &doc;
    if (doc.is_object() && doc.contains("questions")) {
        arr = &doc["questions"];
    }
    if (!arr->is_array()) {
        malformed("submission must be an array or an object with a 'questions' array");
    }
    std::vector<AnswerResult> out;
    std::unordered_set<std::string> seen;
    for (const auto& q : *arr) {
        AnswerResult a;
        a.question_id = require_string(q, "id", "submission");
        const std::string ctx = "submission '" + a.question_id + "'";
        if (!seen.insert(a.question_id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate question id '" + a.question_id + "' in submission");
        }
        a.documents = string_list(q, "documents", ctx);
        if (auto it = q.find("snippets"); it != q.end() && it->is_array()) {
            for (const auto& s : *it) {
                a.snippets.push_back(snippet_from_json(s));
            }
        }
        auto ideal = string_list(q, "ideal_answer", ctx);
        if (!ideal.empty()) {
            a.ideal_answer = ideal.front();
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<AnswerResult> load_submission(const std::string& path)
{
    return parse_submission(parse_json_text(io::read_file(path), path));
}

void write_submission(const std::string& path, const std::vector<AnswerResult>& answers)
{
    io::write_file(path, to_submission_json(answers).dump(2) + "\n");
}

}  // namespace qfs::corpus
