#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "qfs/binary_io.hpp"
#include "qfs/cli.hpp"
#include "qfs/config.hpp"
#include "qfs/embeddings.hpp"
#include "qfs/retrieval.hpp"

using namespace qfs;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream(path) << text;
}

json read_json(const std::string& path)
{
    return json::parse(io::read_file(path));
}

// Four documents, two questions with gold data, stopwords, dense vectors and a config.
struct Workspace {
    fixture::TempDir dir;
    corpus::DocumentCollection docs;

    Workspace()
    {
        docs = corpus::DocumentCollection({
            fixture::doc("d1", "Insulin", "Insulin regulates glucose. The pancreas makes insulin."),
            fixture::doc("d2", "Glucose", "Glucose is a sugar. Insulin lowers glucose levels."),
            fixture::doc("d3", "Cats", "Cats sleep all day. Cats chase mice."),
            fixture::doc("d4", "Mice", "Mice eat cheese. Cats chase mice often."),
        });
        corpus::write_document_collection(dir.file("docs.jsonl"), docs);
        write_text(dir.file("stop.txt"), "the\nis\na\nwhat\ndoes\ndo\n");

        corpus::QuestionRecord q1{"q1", "What does insulin do?", corpus::QuestionType::Summary, {"d1", "d2"}, {},
                                  {"Insulin regulates glucose and lowers glucose levels."}};
        q1.gold_snippets = {fixture::span_of(docs.at("d1"), "abstract", "Insulin regulates glucose."),
                            fixture::span_of(docs.at("d2"), "abstract", "Insulin lowers glucose levels.")};
        corpus::QuestionRecord q2{"q2", "Do cats chase mice?", corpus::QuestionType::YesNo, {"d3", "d4"}, {},
                                  {"Yes, cats chase mice."}};
        q2.gold_snippets = {fixture::span_of(docs.at("d3"), "abstract", "Cats sleep all day. Cats chase mice."),
                            fixture::span_of(docs.at("d4"), "abstract", "Cats chase mice often.")};
        corpus::write_question_set(dir.file("questions.json"), corpus::QuestionSet({q1, q2}));

        retrieval::DenseStore dense(2), queries(2);
        dense.add("d1", std::vector<float>{0, 1});
        dense.add("d2", std::vector<float>{0.2f, 1});
        dense.add("d3", std::vector<float>{1, 0});
        dense.add("d4", std::vector<float>{1, 0.1f});
        queries.add("q1", std::vector<float>{1, 0});
        queries.add("q2", std::vector<float>{0, 1});
        retrieval::save_dense_store(dir.file("docs.dvec"), dense);
        retrieval::save_dense_store(dir.file("queries.dvec"), queries);

        write_config("config.json", constant_config());
    }

    static json constant_config()
    {
        return {{"retrieval", {{"method", "bm25"}}},
                {"model", {{"kind", "constant"}}},
                {"data", {{"documents", "docs.jsonl"}, {"stopwords", "stop.txt"}}}};
    }

    void write_config(const std::string& name, const json& config) const
    {
        write_text(dir.file(name), config.dump(2));
    }

    std::string file(const std::string& name) const { return dir.file(name); }
};

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("index")
    {
        Workspace ws;
        auto r = run({"index", "--docs", ws.file("docs.jsonl"), "--out", ws.file("idx.bin")});
        CHECK(r.code == cli::kExitOk);
        CHECK(r.out.find("4 documents") == 0);
        auto idx = retrieval::InvertedIndex::load(ws.file("idx.bin"));
        CHECK(idx.n_docs() == 4);

        corpus::write_document_collection(ws.file("two.jsonl"),
                                          corpus::DocumentCollection({ws.docs.documents()[0], ws.docs.documents()[1]}));
        CHECK(run({"index", "--docs", ws.file("two.jsonl"), "--out", ws.file("two.bin")}).out.find("2 documents") ==
              0);

        auto missing = run({"index", "--docs", ws.file("nope.jsonl"), "--out", ws.file("x.bin")});
        CHECK(missing.code == cli::kExitDataError);
        CHECK(missing.err.find("error:") == 0);

        write_text(ws.file("empty.jsonl"), "");
        CHECK(run({"index", "--docs", ws.file("empty.jsonl"), "--out", ws.file("e.bin")}).code ==
              cli::kExitDataError);
    }

    TEST_CASE("usage errors and help")
    {
        CHECK(run({}).code == cli::kExitUsage);
        CHECK(run({"frobnicate"}).code == cli::kExitUsage);
        auto r = run({"index", "--docs", "x"});
        CHECK(r.code == cli::kExitUsage);
        CHECK(r.err.find("usage error:") == 0);
        CHECK(run({"cv", "--questions", "q.json", "--k", "1"}).code == cli::kExitUsage);
        CHECK(run({"train", "--questions", "q.json", "--kind", "svm", "--embeddings", "e", "--out", "o"}).code ==
              cli::kExitUsage);
        auto help = run({"--help"});
        CHECK(help.code == cli::kExitOk);
        CHECK(help.out.find("answer") != std::string::npos);
    }

    TEST_CASE("config validate and emit")
    {
        Workspace ws;
        auto v = run({"config", "validate", ws.file("config.json")});
        CHECK(v.code == cli::kExitOk);
        CHECK(v.out.find("ok") != std::string::npos);

        auto emit = run({"config", "emit"});
        CHECK(emit.code == cli::kExitOk);
        CHECK(parse_config(json::parse(emit.out)) == PipelineConfig{});

        CHECK(run({"config", "emit", "--from", ws.file("config.json"), "--out", ws.file("norm.json")}).code ==
              cli::kExitOk);
        CHECK(load_config(ws.file("norm.json")).model.kind == ScorerKind::Constant);

        ws.write_config("bad.json", {{"retrieval", {{"lambda", 2.0}}}});
        CHECK(run({"config", "validate", ws.file("bad.json")}).code == cli::kExitDataError);
    }

    TEST_CASE("retrieve, snippets and answer")
    {
        Workspace ws;
        const auto q = ws.file("questions.json");
        CHECK(run({"retrieve", "--config", ws.file("config.json"), "--questions", q, "--out", ws.file("r.json")})
                  .code == cli::kExitOk);
        auto ranked = read_json(ws.file("r.json"))["questions"];
        REQUIRE(ranked.size() == 2);
        CHECK(ranked[0]["documents"][0]["id"] == "d1");

        CHECK(run({"snippets", "--config", ws.file("config.json"), "--questions", q, "--out", ws.file("s.json")})
                  .code == cli::kExitOk);
        auto snips = read_json(ws.file("s.json"))["questions"];
        REQUIRE(!snips[0]["candidates"].empty());
        CHECK(snips[0]["candidates"][0]["pair_id"] == "q1#0");

        auto a = run({"answer", "--config", ws.file("config.json"), "--questions", q, "--out", ws.file("a.json"),
                      "--threads", "2"});
        CHECK(a.code == cli::kExitOk);
        CHECK(a.out == "2 questions answered\n");
        auto sub = corpus::load_submission(ws.file("a.json"));
        REQUIRE(sub.size() == 2);
        CHECK(sub[0].question_id == "q1");
        CHECK(!sub[0].ideal_answer.empty());
        for (const auto& r : sub) {
            CHECK(r.documents.size() <= 10);
            CHECK(r.snippets.size() <= 10);
            for (const auto& s : r.snippets) {
                CHECK_NOTHROW(corpus::validate_snippet(s, ws.docs));
            }
        }

        corpus::FeedbackStore fb;
        fb.judge_document("q1", "d1", corpus::Polarity::Relevant);
        write_text(ws.file("fb.json"), corpus::to_json(fb).dump());
        CHECK(run({"answer", "--config", ws.file("config.json"), "--questions", q, "--out", ws.file("b.json"),
                   "--feedback", ws.file("fb.json")})
                  .code == cli::kExitOk);
        auto with_fb = corpus::load_submission(ws.file("b.json"));
        for (const auto& d : with_fb[0].documents) {
            CHECK(d != "d1");
        }
    }

    TEST_CASE("hybrid interpolation weight changes the ranking")
    {
        Workspace ws;
        auto cfg = Workspace::constant_config();
        cfg["retrieval"] = {{"method", "nir"}, {"lambda", 1.0}};
        cfg["data"]["dense"] = "docs.dvec";
        cfg["data"]["query_vectors"] = "queries.dvec";
        ws.write_config("bm25.json", cfg);
        cfg["retrieval"]["lambda"] = 0.0;
        ws.write_config("dense.json", cfg);
        const auto q = ws.file("questions.json");
        CHECK(run({"retrieve", "--config", ws.file("bm25.json"), "--questions", q, "--out", ws.file("l1.json")}).code ==
              cli::kExitOk);
        CHECK(run({"retrieve", "--config", ws.file("dense.json"), "--questions", q, "--out", ws.file("l0.json")})
                  .code == cli::kExitOk);
        auto first = [](const json& j) { return j["questions"][0]["documents"][0]["id"].get<std::string>(); };
        CHECK(first(read_json(ws.file("l1.json"))) == "d1");
        CHECK(first(read_json(ws.file("l0.json"))) == "d3");

        cfg["data"].erase("query_vectors");
        ws.write_config("noq.json", cfg);
        CHECK(run({"retrieve", "--config", ws.file("noq.json"), "--questions", q, "--out", ws.file("x.json")}).code ==
              cli::kExitDataError);
    }

    TEST_CASE("evaluate gold against itself")
    {
        Workspace ws;
        auto gold = corpus::load_question_set(ws.file("questions.json"));
        std::vector<corpus::AnswerResult> perfect;
        for (const auto& q : gold) {
            perfect.push_back({q.id, q.gold_documents, q.gold_snippets, q.ideal_answers[0]});
        }
        corpus::write_submission(ws.file("perfect.json"), perfect);
        auto r = run({"evaluate", "--gold", ws.file("questions.json"), "--submission", ws.file("perfect.json"),
                      "--json", ws.file("report.json")});
        CHECK(r.code == cli::kExitOk);
        auto rep = read_json(ws.file("report.json"));
        CHECK(rep["macro"]["document_f1"] == 1.0);
        CHECK(rep["macro"]["snippet_f1"] == 1.0);
        CHECK(rep["macro"]["ideal_su4_f1"] == 1.0);
    }

    TEST_CASE("label, train and cv")
    {
        Workspace ws;
        const auto q = ws.file("questions.json");
        auto l = run({"label", "--questions", q, "--out", ws.file("labels.json")});
        CHECK(l.code == cli::kExitOk);
        auto labels = read_json(ws.file("labels.json"))["examples"];
        REQUIRE(labels.size() == 5);
        CHECK(l.out == "5 examples, 5 positive\n");

        std::vector<embed::ContextEmbeddingRecord> recs;
        Rng rng(2);
        for (const auto& ex : labels) {
            embed::ContextEmbeddingRecord r{ex["pair_id"], embed::FloatMatrix(3, 4), {false, true, true}};
            for (Eigen::Index i = 0; i < r.tokens.size(); ++i) {
                r.tokens.data()[i] = static_cast<float>(rng.uniform(-1, 1));
            }
            recs.push_back(std::move(r));
        }
        embed::write_context_embeddings(ws.file("pairs.cemb"), recs, 4);
        auto t = run({"train", "--labels", ws.file("labels.json"), "--kind", "pooled", "--embeddings",
                      ws.file("pairs.cemb"), "--out", ws.file("pooled.qfsm"), "--epochs", "2", "--hidden", "4"});
        CHECK(t.code == cli::kExitOk);
        auto bytes = io::read_file(ws.file("pooled.qfsm"));
        REQUIRE(bytes.size() > 9);
        CHECK(bytes.substr(0, 4) == "QFSM");
        CHECK(static_cast<unsigned char>(bytes[8]) == 2);

        write_text(ws.file("words.vec"), "3 2\ninsulin 0.1 0.2\nglucose 0.3 -0.1\ncats -0.2 0.4\n");
        auto n = run({"train", "--questions", q, "--kind", "nnc", "--embeddings", ws.file("words.vec"), "--out",
                      ws.file("nnc.qfsm"), "--epochs", "1", "--lstm", "3", "--hidden", "4"});
        CHECK(n.code == cli::kExitOk);
        CHECK(static_cast<unsigned char>(io::read_file(ws.file("nnc.qfsm"))[8]) == 1);

        auto cfg = Workspace::constant_config();
        cfg["model"] = {{"kind", "nnc"}, {"params_path", "nnc.qfsm"}, {"embeddings_path", "words.vec"}};
        ws.write_config("nnc.json", cfg);
        CHECK(run({"answer", "--config", ws.file("nnc.json"), "--questions", q, "--out", ws.file("n.json")}).code ==
              cli::kExitOk);

        auto c1 = run({"cv", "--questions", q, "--k", "2", "--scorer", "oracle", "--out", ws.file("cv1.json")});
        auto c2 = run({"cv", "--questions", q, "--k", "2", "--scorer", "oracle", "--out", ws.file("cv2.json")});
        CHECK(c1.code == cli::kExitOk);
        CHECK(c1.out == c2.out);
        CHECK(io::read_file(ws.file("cv1.json")) == io::read_file(ws.file("cv2.json")));
        CHECK(run({"cv", "--questions", q, "--k", "3", "--scorer", "oracle"}).code == cli::kExitDataError);
        CHECK(run({"cv", "--questions", q, "--k", "2", "--scorer", "pooled"}).code == cli::kExitUsage);
    }
}
