#include "doctest.h"
#include "fixtures.hpp"
#include "qfs/binary_io.hpp"
#include "qfs/corpus.hpp"
#include "qfs/error.hpp"
#include "qfs/rng.hpp"

using namespace qfs;
using namespace qfs::corpus;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("corpus")
{
    TEST_CASE("minimal question set")
    {
        auto qs = parse_question_set(json::parse(R"([{"id":"q1","body":"What is X?","type":"summary"}])"));
        REQUIRE(qs.size() == 1);
        CHECK(qs[0].gold_documents.empty());
        CHECK(qs[0].gold_snippets.empty());
        CHECK(qs[0].ideal_answers.empty());
        CHECK(qs.find("q1") == &qs[0]);
        CHECK(qs.find("nope") == nullptr);
    }

    TEST_CASE("question set errors")
    {
        CHECK(code_of([] {
                  parse_question_set(json::parse(R"([{"id":"q1","body":"?","type":"listt"}])"));
              }) == ErrorCode::UnknownQuestionType);
        CHECK(code_of([] {
                  parse_question_set(json::parse(
                      R"([{"id":"q1","body":"?","type":"list"},{"id":"q1","body":"?","type":"list"}])"));
              }) == ErrorCode::DuplicateId);
        CHECK(code_of([] { parse_question_set(json::parse(R"([{"id":"q1","type":"list"}])")); }) ==
              ErrorCode::MalformedInput);
        CHECK(code_of([] { parse_question_set(json::parse(R"({"x":1})")); }) == ErrorCode::MalformedInput);
        CHECK(code_of([] {
                  parse_question_set(json::parse(R"([{"id":"q","body":"?","type":"list","snippets":[
                      {"document":"d","section":"abstract","offsetInBeginSection":0,
                       "offsetInEndSection":3,"text":"ab"}]}])"));
              }) == ErrorCode::MalformedInput);
        CHECK(code_of([] { load_question_set("/nonexistent/q.json"); }) == ErrorCode::MalformedInput);
    }

    TEST_CASE("question set with many questions and wrapped form")
    {
        json arr = json::array();
        for (int i = 0; i < 3742; ++i) {
            arr.push_back({{"id", "q" + std::to_string(i)}, {"body", "b"}, {"type", "factoid"}});
        }
        CHECK(parse_question_set(arr).size() == 3742);
        CHECK(parse_question_set(json{{"questions", arr}}).size() == 3742);
    }

    TEST_CASE("question round trip ignores unknown fields")
    {
        auto src = json::parse(R"([{"id":"q1","body":"Is ß common?","type":"yesno","extra":true,
            "documents":["d1","d2"],
            "snippets":[{"document":"d1","beginSection":"abstract","offsetInBeginSection":2,
                         "offsetInEndSection":6,"text":"ßxyz"}],
            "ideal_answer":["Yes.","Indeed."]}])");
        auto qs = parse_question_set(src);
        REQUIRE(qs[0].gold_snippets.size() == 1);
        CHECK(qs[0].gold_snippets[0].section_id == "abstract");
        CHECK(qs[0].type == QuestionType::YesNo);
        fixture::TempDir dir;
        write_question_set(dir.file("q.json"), qs);
        CHECK(load_question_set(dir.file("q.json")) == qs);
    }

    TEST_CASE("document collection")
    {
        CHECK(parse_document_collection("").size() == 0);
        auto one = parse_document_collection(
            R"({"id":"d1","sections":[{"id":"title","text":"T"},{"id":"abstract","text":"A b."}]})"
            "\n\n");
        REQUIRE(one.size() == 1);
        CHECK(one.at("d1").sections[0].id == "title");
        CHECK(one.at("d1").sections[1].id == "abstract");
        CHECK(code_of([] { parse_document_collection("{\"id\":\"d\",\"sections\":[]}\n{\"id\":\"d\",\"sections\":[]}"); }) ==
              ErrorCode::DuplicateId);
        CHECK(code_of([] { parse_document_collection("{not json}"); }) == ErrorCode::MalformedInput);
        CHECK(code_of([&] { (void)one.at("zz"); }) == ErrorCode::UnknownDocument);

        fixture::TempDir dir;
        write_document_collection(dir.file("d.jsonl"), one);
        auto back = load_document_collection(dir.file("d.jsonl"));
        CHECK(back.documents() == one.documents());
    }

    TEST_CASE("validate_snippet")
    {
        DocumentCollection docs({fixture::doc("d1", "Title", "Crème brûlée is sweet.")});
        auto ok = fixture::span_of(docs.at("d1"), "abstract", "brûlée");
        CHECK(ok.begin == 6);
        CHECK_NOTHROW(validate_snippet(ok, docs));
        auto bad = ok;
        bad.text = "brulee";
        CHECK_THROWS_AS(validate_snippet(bad, docs), Error);
        auto out = ok;
        out.end = 99;
        CHECK_THROWS_AS(validate_snippet(out, docs), Error);
    }

    TEST_CASE("filter_judged examples")
    {
        FeedbackStore fb;
        fb.judge_document("q", "d2", Polarity::Relevant);
        std::vector<std::string> docs{"d1", "d2", "d3"};
        CHECK(filter_judged(docs, fb, "q", FilterMode::ExcludeAllJudged) == std::vector<std::string>{"d1", "d3"});
        CHECK(filter_judged(docs, fb, "q", FilterMode::ExcludeIrrelevantOnly) == docs);
        CHECK(filter_judged(docs, fb, "other", FilterMode::ExcludeAllJudged) == docs);

        SnippetSpan s1{"d1", "abstract", 0, 4, "abcd"};
        SnippetSpan s2{"d1", "abstract", 5, 9, "efgh"};
        fb.judge_snippet("q", s1.key(), Polarity::Irrelevant);
        std::vector<SnippetSpan> snips{s1, s2};
        CHECK(filter_judged(snips, fb, "q", FilterMode::ExcludeIrrelevantOnly) == std::vector<SnippetSpan>{s2});
        // Overlapping but unequal spans are not judged.
        SnippetSpan near{"d1", "abstract", 0, 5, "abcde"};
        CHECK(filter_judged(std::vector<SnippetSpan>{near}, fb, "q", FilterMode::ExcludeAllJudged).size() == 1);
        CHECK_THROWS_AS(fb.judge_document("q", "d2", Polarity::Irrelevant), Error);
    }

    TEST_CASE("property: filter_judged is idempotent, order preserving, identity without feedback")
    {
        Rng rng(17);
        for (int iter = 0; iter < 200; ++iter) {
            std::vector<std::string> docs;
            auto n = rng.below(12);
            for (std::uint64_t i = 0; i < n; ++i) {
                docs.push_back("d" + std::to_string(rng.below(20)));
            }
            FeedbackStore fb;
            for (int j = 0; j < 6; ++j) {
                auto id = "d" + std::to_string(rng.below(20));
                if (!fb.polarity("q", id)) {
                    fb.judge_document("q", id, rng.below(2) ? Polarity::Relevant : Polarity::Irrelevant);
                }
            }
            for (auto mode : {FilterMode::ExcludeAllJudged, FilterMode::ExcludeIrrelevantOnly}) {
                auto once = filter_judged(docs, fb, "q", mode);
                CHECK(filter_judged(once, fb, "q", mode) == once);
                std::size_t k = 0;
                for (const auto& d : docs) {
                    if (k < once.size() && once[k] == d) {
                        ++k;
                    }
                }
                CHECK(k == once.size());
                CHECK(filter_judged(docs, FeedbackStore{}, "q", mode) == docs);
            }
        }
    }

    TEST_CASE("feedback and submission round trip")
    {
        FeedbackStore fb;
        fb.judge_document("q1", "d9", Polarity::Irrelevant);
        fb.judge_snippet("q1", {"d1", "abstract", 3, 8}, Polarity::Relevant);
        auto back = parse_feedback(to_json(fb));
        CHECK(back.polarity("q1", std::string("d9")) == Polarity::Irrelevant);
        CHECK(back.polarity("q1", SpanKey{"d1", "abstract", 3, 8}) == Polarity::Relevant);

        std::vector<AnswerResult> answers{{"q1", {"d1", "d2"}, {{"d1", "abstract", 0, 3, "abc"}}, "An answer."},
                                          {"q2", {}, {}, ""}};
        fixture::TempDir dir;
        write_submission(dir.file("s.json"), answers);
        CHECK(load_submission(dir.file("s.json")) == answers);
        auto sub = to_submission_json(answers);
        REQUIRE(sub["questions"].size() == 2);
        CHECK(sub["questions"][0]["snippets"][0]["offsetInBeginSection"] == 0);
        CHECK(sub["questions"][0]["ideal_answer"] == "An answer.");
        json dup = {{"questions", json::array({{{"id", "a"}}, {{"id", "a"}}})}};
        CHECK(code_of([&] { parse_submission(dup); }) == ErrorCode::DuplicateId);
    }
}
